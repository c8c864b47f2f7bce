#include <algorithm>
#include <random>

#include "seagle/errors.hpp"
#include "seagle/pvalue.hpp"

namespace seagle {

std::vector<double> survival_mc(std::span<const double> qs,
                                const WeightedChiSq& dist,
                                std::int64_t n_samples,
                                std::uint64_t seed) {
    if (n_samples < 10000) {
        throw ParameterError("survival_mc: n_samples must be at least 1e4");
    }
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    const auto lambdas = dist.lambdas();

    std::vector<std::int64_t> exceed(qs.size(), 0);
    for (std::int64_t i = 0; i < n_samples; ++i) {
        double draw = 0.0;
        for (double l : lambdas) {
            const double z = normal(rng);
            draw += l * z * z;
        }
        for (std::size_t k = 0; k < qs.size(); ++k) {
            if (draw > qs[k]) ++exceed[k];
        }
    }
    std::vector<double> p(qs.size());
    std::transform(exceed.begin(), exceed.end(), p.begin(), [n_samples](std::int64_t e) {
        return static_cast<double>(e) / static_cast<double>(n_samples);
    });
    return p;
}

double survival_mc(double q, const WeightedChiSq& dist, std::int64_t n_samples, std::uint64_t seed) {
    return survival_mc(std::span<const double>(&q, 1), dist, n_samples, seed).front();
}

}  // namespace seagle
