#include "seagle/simgen.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include "seagle/errors.hpp"
#include "seagle/oracle.hpp"
#include "seagle/parallel.hpp"

namespace seagle::sim {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr int kMaxRedraws = 100;

void check_model_dims(const MatrixXd& X, const MatrixXd& G, const VectorXd& E, const char* who) {
    if (X.rows() != G.rows() || E.size() != G.rows()) {
        throw ShapeError(std::string(who) + ": X, G and E must have the same number of rows");
    }
}

VectorXd normal_vector(Index size, double variance, Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    VectorXd v(size);
    const double sd = std::sqrt(variance);
    for (Index i = 0; i < size; ++i) v[i] = sd * normal(rng);
    return v;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t replicate, std::uint64_t stream) {
    return splitmix64(splitmix64(splitmix64(seed) ^ replicate) ^ (stream * 0x632be59bd9b4e019ULL));
}

std::string to_string(SimMode mode) {
    return mode == SimMode::random_effects ? "random" : "fixed";
}

SimMode parse_sim_mode(const std::string& text) {
    if (text == "random" || text == "random_effects") return SimMode::random_effects;
    if (text == "fixed" || text == "fixed_effects") return SimMode::fixed_effects;
    throw ParameterError("unknown simulation mode '" + text + "' (expected random or fixed)");
}

void SimConfig::validate() const {
    std::ostringstream err;
    if (n < 4) err << "n must be at least 4; ";
    if (L < 1) err << "L must be at least 1; ";
    if (!(maf_low > 0.0 && maf_low <= maf_high && maf_high <= 0.5)) {
        err << "need 0 < maf_low <= maf_high <= 0.5; ";
    }
    if (replicates < 1) err << "replicates must be at least 1; ";
    if (!(sigma > 0.0)) err << "sigma must be positive; ";
    if (mode == SimMode::random_effects) {
        if (!(tau >= 0.0) || !(nu >= 0.0)) err << "tau and nu must be nonnegative; ";
    } else if (ell < 0 || ell > L) {
        err << "ell must lie in [0, L]; ";
    }
    for (double a : alpha_levels) {
        if (!(a > 0.0 && a < 1.0)) err << "alpha levels must lie in (0, 1); ";
    }
    if (oracle_compare && n > oracle::kMaxDenseN) err << "oracle comparison needs n <= 2000; ";
    if (threads < 1) err << "threads must be at least 1; ";
    const std::string msg = err.str();
    if (!msg.empty()) throw ParameterError("SimConfig: " + msg.substr(0, msg.size() - 2));
    em.validate();
}

std::vector<double> ExperimentReport::p_values() const {
    std::vector<double> p;
    p.reserve(records.size());
    for (const auto& r : records) {
        if (!r.failed) p.push_back(r.p_value);
    }
    return p;
}

// -------------------------------------------------------------------------
// Data generation
// -------------------------------------------------------------------------

MatrixXd gen_genotypes(Index n, Index L, double maf_low, double maf_high, Rng& rng) {
    if (n < 1 || L < 1) throw ParameterError("gen_genotypes: n and L must be positive");
    if (!(maf_low > 0.0 && maf_low <= maf_high && maf_high <= 0.5)) {
        throw ParameterError("gen_genotypes: need 0 < maf_low <= maf_high <= 0.5");
    }
    std::uniform_real_distribution<double> maf_dist(maf_low, maf_high);
    MatrixXd G(n, L);
    for (Index j = 0; j < L; ++j) {
        const double maf = maf_dist(rng);
        std::binomial_distribution<int> dosage(2, maf);
        bool polymorphic = false;
        for (int attempt = 0; attempt < kMaxRedraws && !polymorphic; ++attempt) {
            for (Index i = 0; i < n; ++i) G(i, j) = dosage(rng);
            polymorphic = (G.col(j).array() != G(0, j)).any();
        }
        if (!polymorphic) {
            std::ostringstream msg;
            msg << "gen_genotypes: column " << j << " stayed monomorphic after " << kMaxRedraws
                << " draws (maf=" << maf << ", n=" << n << "); increase maf_low";
            throw GenerationError(msg.str());
        }
    }
    return G;
}

MatrixXd gen_genotypes(Index n, Index L, double maf_low, double maf_high, std::uint64_t seed) {
    Rng rng(seed);
    return gen_genotypes(n, L, maf_low, maf_high, rng);
}

MatrixXd gen_covariates(Index n, Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    MatrixXd X(n, 3);
    X.col(0).setOnes();
    for (Index i = 0; i < n; ++i) X(i, 1) = normal(rng);
    for (Index i = 0; i < n; ++i) X(i, 2) = normal(rng);
    return X;
}

VectorXd gen_random_effects_pheno(const MatrixXd& X, const MatrixXd& G, const VectorXd& E,
                                  double tau, double sigma, double nu, Rng& rng) {
    check_model_dims(X, G, E, "gen_random_effects_pheno");
    if (!(tau >= 0.0) || !(sigma >= 0.0) || !(nu >= 0.0)) {
        throw ParameterError("gen_random_effects_pheno: variance components must be nonnegative");
    }
    const Index L = G.cols();
    const VectorXd b = normal_vector(L, tau, rng);
    const VectorXd c = normal_vector(L, nu, rng);
    const VectorXd eps = normal_vector(G.rows(), sigma, rng);
    VectorXd y = X.rowwise().sum();
    y.noalias() += G * b;
    y.array() += E.array() * (G * c).array();
    y += eps;
    return y;
}

VectorXd gen_random_effects_pheno(const MatrixXd& X, const MatrixXd& G, const VectorXd& E,
                                  double tau, double sigma, double nu, std::uint64_t seed) {
    Rng rng(seed);
    return gen_random_effects_pheno(X, G, E, tau, sigma, nu, rng);
}

VectorXd gen_fixed_effects_pheno(const MatrixXd& X, const MatrixXd& G, const VectorXd& E,
                                 double gamma_G, double gamma_GE, Index ell, double sigma, Rng& rng) {
    check_model_dims(X, G, E, "gen_fixed_effects_pheno");
    if (ell < 0 || ell > G.cols()) throw ParameterError("gen_fixed_effects_pheno: ell must lie in [0, L]");
    if (!(sigma >= 0.0)) throw ParameterError("gen_fixed_effects_pheno: sigma must be nonnegative");
    VectorXd g_eff = VectorXd::Zero(G.cols());
    VectorXd ge_eff = VectorXd::Zero(G.cols());
    g_eff.head(ell).setConstant(gamma_G);
    ge_eff.head(ell).setConstant(gamma_GE);
    VectorXd y = X.rowwise().sum();
    y.noalias() += G * g_eff;
    y.array() += E.array() * (G * ge_eff).array();
    y += normal_vector(G.rows(), sigma, rng);
    return y;
}

VectorXd gen_fixed_effects_pheno(const MatrixXd& X, const MatrixXd& G, const VectorXd& E,
                                 double gamma_G, double gamma_GE, Index ell, double sigma,
                                 std::uint64_t seed) {
    Rng rng(seed);
    return gen_fixed_effects_pheno(X, G, E, gamma_G, gamma_GE, ell, sigma, rng);
}

// -------------------------------------------------------------------------
// Experiments
// -------------------------------------------------------------------------

TestInput make_replicate(const SimConfig& cfg, int index) {
    const auto rep = static_cast<std::uint64_t>(index);
    Rng geno_rng(derive_seed(cfg.seed, rep, 0));
    Rng cov_rng(derive_seed(cfg.seed, rep, 1));
    Rng pheno_rng(derive_seed(cfg.seed, rep, 2));

    MatrixXd G = gen_genotypes(cfg.n, cfg.L, cfg.maf_low, cfg.maf_high, geno_rng);
    MatrixXd X = gen_covariates(cfg.n, cov_rng);
    const VectorXd E = X.col(2);
    VectorXd y = cfg.mode == SimMode::random_effects
                     ? gen_random_effects_pheno(X, G, E, cfg.tau, cfg.sigma, cfg.nu, pheno_rng)
                     : gen_fixed_effects_pheno(X, G, E, cfg.gamma_G, cfg.gamma_GE, cfg.ell, cfg.sigma,
                                               pheno_rng);
    return TestInput(std::move(y), std::move(X), 2, std::move(G));
}

ReplicateRecord run_replicate(const SimConfig& cfg, int index) {
    ReplicateRecord rec;
    rec.index = index;
    const auto start = std::chrono::steady_clock::now();
    try {
        const TestInput input = make_replicate(cfg, index);
        const VcTestResult res = run_test(input, cfg.em, cfg.test);
        rec.T = res.statistic_T;
        rec.p_value = res.p_value;
        rec.p_davies = res.p_davies;
        rec.p_liu = res.p_liu;
        rec.tau_hat = res.tau_hat;
        rec.sigma_hat = res.sigma_hat;
        rec.n_iter = res.n_iter;
        rec.converged = res.converged;
        rec.degenerate = res.degenerate;
        if (cfg.oracle_compare) {
            const double t_dense = oracle::dense_statistic(input, res.tau_hat, res.sigma_hat).T;
            rec.oracle_abs_diff_T = std::abs(t_dense - res.statistic_T);
        }
    } catch (const Error& e) {
        rec.failed = true;
        rec.failure = e.what();
    }
    rec.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return rec;
}

RateEstimate rejection_rate(const std::vector<double>& p_values, double alpha) {
    RateEstimate r;
    r.alpha = alpha;
    r.n = static_cast<int>(p_values.size());
    r.rejections = static_cast<int>(
        std::count_if(p_values.begin(), p_values.end(), [alpha](double p) { return p < alpha; }));
    if (r.n > 0) {
        r.rate = static_cast<double>(r.rejections) / r.n;
        r.se = std::sqrt(r.rate * (1.0 - r.rate) / r.n);
    }
    r.ci_low = r.rate - 1.96 * r.se;
    r.ci_high = r.rate + 1.96 * r.se;
    return r;
}

ExperimentReport run_experiment(const SimConfig& cfg) {
    cfg.validate();
    ExperimentReport report;
    report.config = cfg;
    report.records.resize(static_cast<std::size_t>(cfg.replicates));
    parallel_for(report.records.size(), cfg.threads, [&](std::size_t i) {
        report.records[i] = run_replicate(cfg, static_cast<int>(i));
    });

    double sum_dt = 0.0, sum_dt2 = 0.0, sum_ds = 0.0, sum_ds2 = 0.0;
    for (const auto& r : report.records) {
        if (r.failed) {
            ++report.n_failed;
            continue;
        }
        ++report.n_ok;
        if (!r.converged) ++report.n_not_converged;
        report.max_oracle_abs_diff_T = std::max(report.max_oracle_abs_diff_T, r.oracle_abs_diff_T);
        const double dt = r.tau_hat - cfg.tau;
        const double ds = r.sigma_hat - cfg.sigma;
        sum_dt += dt;
        sum_dt2 += dt * dt;
        sum_ds += ds;
        sum_ds2 += ds * ds;
    }
    const std::vector<double> p = report.p_values();
    for (double a : cfg.alpha_levels) report.rates.push_back(rejection_rate(p, a));

    if (cfg.mode == SimMode::random_effects && cfg.nu == 0.0 && report.n_ok > 0) {
        const double k = report.n_ok;
        report.has_estimator_summary = true;
        report.estimators = {sum_dt / k, sum_dt2 / k, sum_ds / k, sum_ds2 / k};
    }
    return report;
}

KsResult ks_uniform(std::vector<double> values) {
    KsResult res;
    if (values.empty()) return res;
    std::sort(values.begin(), values.end());
    const double n = static_cast<double>(values.size());
    double d = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double x = std::clamp(values[i], 0.0, 1.0);
        d = std::max({d, (i + 1) / n - x, x - i / n});
    }
    res.statistic = d;
    // Asymptotic Kolmogorov distribution with the small-sample correction of Stephens.
    const double sqrt_n = std::sqrt(n);
    const double lambda = (sqrt_n + 0.12 + 0.11 / sqrt_n) * d;
    if (lambda < 0.2) {
        res.p_value = 1.0;
        return res;
    }
    double sum = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * lambda * lambda);
        sum += (k % 2 == 1 ? term : -term);
        if (term < 1e-16) break;
    }
    res.p_value = std::clamp(2.0 * sum, 0.0, 1.0);
    return res;
}

}  // namespace seagle::sim
