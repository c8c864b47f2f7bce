#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace seagle {

/**
 * Distribution of sum_l lambda_l * chi2_1 with central one-degree-of-freedom
 * components. Weights are validated (finite, positive, nonempty) and stored
 * sorted nonincreasing.
 */
class WeightedChiSq {
public:
    explicit WeightedChiSq(std::vector<double> lambdas);

    std::span<const double> lambdas() const noexcept { return lambdas_; }
    std::size_t size() const noexcept { return lambdas_.size(); }

    /// sum_l lambda_l^k
    double power_sum(int k) const;
    double mean() const { return power_sum(1); }
    double variance() const { return 2.0 * power_sum(2); }

private:
    std::vector<double> lambdas_;
};

/// Moment-matching upper-tail probability P(Q > q).
double pvalue_liu(double q, const WeightedChiSq& dist);

enum class DaviesStatus {
    ok = 0,
    accuracy_not_achieved = 1,   // requested accuracy not reached within the term cap
    roundoff_significant = 2,    // round-off error possibly significant
    invalid_parameters = 3,
    integration_params_not_found = 4,
};

std::string_view to_string(DaviesStatus status);

struct DaviesResult {
    double p = 1.0;
    DaviesStatus status = DaviesStatus::ok;
    double error_bound = 0.0;  // absolute sum accumulated by the integration
    int terms = 0;             // integration terms used
    int integrations = 0;
    double achieved_accuracy = 0.0;  // accuracy actually used; > requested on fallback

    bool ok() const noexcept { return status == DaviesStatus::ok; }
};

struct DaviesOptions {
    double accuracy = 1e-9;
    int max_terms = 100000;
};

/// Upper-tail probability P(Q > q) by characteristic-function inversion.
/// When the requested accuracy cannot be met, the status records the failure
/// and p holds the result at the tightest accuracy that could be reached
/// (NaN if none).
DaviesResult pvalue_davies(double q, const WeightedChiSq& dist, const DaviesOptions& opts = {});

/// Empirical P(Q > q) from n_samples draws of sum lambda_l z_l^2.
double survival_mc(double q, const WeightedChiSq& dist, std::int64_t n_samples, std::uint64_t seed);

/// As survival_mc, evaluated on several thresholds from one set of draws.
std::vector<double> survival_mc(std::span<const double> qs,
                                const WeightedChiSq& dist,
                                std::int64_t n_samples,
                                std::uint64_t seed);

}  // namespace seagle
