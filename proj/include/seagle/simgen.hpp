#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "seagle/reml_em.hpp"
#include "seagle/vc_test.hpp"

namespace seagle::sim {

using Rng = std::mt19937_64;

/// Independent stream seed for (seed, replicate, purpose); SplitMix64 mixing.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t replicate, std::uint64_t stream = 0);

enum class SimMode { random_effects, fixed_effects };

std::string to_string(SimMode mode);
SimMode parse_sim_mode(const std::string& text);

struct SimConfig {
    Index n = 1000;
    Index L = 50;
    SimMode mode = SimMode::random_effects;
    // random-effects model
    double tau = 1.0;
    double sigma = 1.0;
    double nu = 0.0;
    // fixed-effects model (sigma is shared)
    double gamma_G = 0.0;
    double gamma_GE = 0.0;
    Index ell = 0;

    double maf_low = 0.005;
    double maf_high = 0.05;
    int replicates = 100;
    std::vector<double> alpha_levels{0.05};
    std::uint64_t seed = 1;

    bool oracle_compare = false;  // dense T for every replicate; n <= 2000
    int threads = 1;
    EmConfig em;
    VcTestOptions test;

    void validate() const;
};

struct ReplicateRecord {
    int index = 0;
    bool failed = false;
    std::string failure;
    double T = 0.0;
    double p_value = 1.0;
    double p_davies = 0.0;
    double p_liu = 0.0;
    double tau_hat = 0.0;
    double sigma_hat = 0.0;
    int n_iter = 0;
    bool converged = false;
    bool degenerate = false;
    double oracle_abs_diff_T = 0.0;
    double wall_seconds = 0.0;
};

struct RateEstimate {
    double alpha = 0.0;
    int rejections = 0;
    int n = 0;
    double rate = 0.0;
    double se = 0.0;
    double ci_low = 0.0;   // rate - 1.96 se
    double ci_high = 0.0;  // rate + 1.96 se
};

struct EstimatorSummary {
    double bias_tau = 0.0;
    double mse_tau = 0.0;
    double bias_sigma = 0.0;
    double mse_sigma = 0.0;
};

struct ExperimentReport {
    SimConfig config;
    std::vector<RateEstimate> rates;
    bool has_estimator_summary = false;  // random-effects mode with nu = 0
    EstimatorSummary estimators;
    int n_ok = 0;
    int n_failed = 0;
    int n_not_converged = 0;
    double max_oracle_abs_diff_T = 0.0;
    std::vector<ReplicateRecord> records;

    std::vector<double> p_values() const;  // successful replicates, in index order
};

MatrixXd gen_genotypes(Index n, Index L, double maf_low, double maf_high, Rng& rng);
MatrixXd gen_genotypes(Index n, Index L, double maf_low, double maf_high, std::uint64_t seed);

/// [1 | X | E] with X, E standard normal; E is column 2.
MatrixXd gen_covariates(Index n, Rng& rng);

VectorXd gen_random_effects_pheno(const MatrixXd& X, const MatrixXd& G, const VectorXd& E,
                                  double tau, double sigma, double nu, Rng& rng);
VectorXd gen_random_effects_pheno(const MatrixXd& X, const MatrixXd& G, const VectorXd& E,
                                  double tau, double sigma, double nu, std::uint64_t seed);

VectorXd gen_fixed_effects_pheno(const MatrixXd& X, const MatrixXd& G, const VectorXd& E,
                                 double gamma_G, double gamma_GE, Index ell, double sigma, Rng& rng);
VectorXd gen_fixed_effects_pheno(const MatrixXd& X, const MatrixXd& G, const VectorXd& E,
                                 double gamma_G, double gamma_GE, Index ell, double sigma,
                                 std::uint64_t seed);

/// Data of one replicate, regenerated from (cfg.seed, index).
TestInput make_replicate(const SimConfig& cfg, int index);

ReplicateRecord run_replicate(const SimConfig& cfg, int index);

RateEstimate rejection_rate(const std::vector<double>& p_values, double alpha);

ExperimentReport run_experiment(const SimConfig& cfg);

struct KsResult {
    double statistic = 0.0;
    double p_value = 1.0;
};

/// One-sample Kolmogorov-Smirnov test against Uniform(0, 1).
KsResult ks_uniform(std::vector<double> values);

}  // namespace seagle::sim
