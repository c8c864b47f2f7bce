#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/non_central_chi_squared.hpp>

#include "seagle/errors.hpp"
#include "seagle/pvalue.hpp"

namespace seagle {

WeightedChiSq::WeightedChiSq(std::vector<double> lambdas) : lambdas_(std::move(lambdas)) {
    if (lambdas_.empty()) {
        throw ParameterError("WeightedChiSq: at least one weight is required");
    }
    for (double l : lambdas_) {
        if (!std::isfinite(l) || !(l > 0.0)) {
            std::ostringstream msg;
            msg << "WeightedChiSq: weights must be finite and positive, got " << l;
            throw ParameterError(msg.str());
        }
    }
    std::sort(lambdas_.begin(), lambdas_.end(), std::greater<>());
}

double WeightedChiSq::power_sum(int k) const {
    double s = 0.0;
    for (double l : lambdas_) s += std::pow(l, k);
    return s;
}

double pvalue_liu(double q, const WeightedChiSq& dist) {
    if (!(q >= 0.0)) {
        throw ParameterError("pvalue_liu: q must be nonnegative");
    }
    const double c1 = dist.power_sum(1);
    const double c2 = dist.power_sum(2);
    const double c3 = dist.power_sum(3);
    const double c4 = dist.power_sum(4);

    const double s1 = c3 / std::pow(c2, 1.5);
    const double s2 = c4 / (c2 * c2);

    double delta = 0.0;
    double df = 0.0;
    if (s1 * s1 > s2) {
        const double a = 1.0 / (s1 - std::sqrt(s1 * s1 - s2));
        delta = s1 * a * a * a - a * a;
        df = a * a - 2.0 * delta;
    } else {
        df = c2 * c2 * c2 / (c3 * c3);
    }
    if (!std::isfinite(c1) || !std::isfinite(c4) || !std::isfinite(df) || !(df > 0.0)) {
        throw NumericalError("pvalue_liu: non-finite cumulants or degenerate surrogate");
    }

    const double t_star =
        (q - c1) / std::sqrt(2.0 * c2) * std::sqrt(2.0 * df + 4.0 * delta) + (df + delta);
    if (t_star <= 0.0) return 1.0;

    double p = 0.0;
    if (delta > 0.0) {
        const boost::math::non_central_chi_squared surrogate(df, delta);
        p = boost::math::cdf(boost::math::complement(surrogate, t_star));
    } else {
        const boost::math::chi_squared surrogate(df);
        p = boost::math::cdf(boost::math::complement(surrogate, t_star));
    }
    return std::clamp(p, 0.0, 1.0);
}

}  // namespace seagle
