#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include <Eigen/Core>

#include "seagle/simgen.hpp"
#include "seagle/vc_test.hpp"

namespace testsupport {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

inline MatrixXd random_normal(Index rows, Index cols, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    MatrixXd m(rows, cols);
    for (Index j = 0; j < cols; ++j)
        for (Index i = 0; i < rows; ++i) m(i, j) = normal(rng);
    return m;
}

inline double rel_err(const MatrixXd& a, const MatrixXd& b) {
    const double scale = b.norm();
    return scale > 0.0 ? (a - b).norm() / scale : (a - b).norm();
}

inline double rel_err(double a, double b) {
    const double scale = std::abs(b);
    return scale > 0.0 ? std::abs(a - b) / scale : std::abs(a - b);
}

/// [1 | x | e] with standard normal x, e.
inline MatrixXd design(Index n, std::uint64_t seed) {
    MatrixXd X = random_normal(n, 3, seed);
    X.col(0).setOnes();
    return X;
}

/// Simulated instance from the random-effects model; nu > 0 adds GxE signal.
inline seagle::TestInput instance(Index n, Index L, std::uint64_t seed, double nu = 0.0) {
    seagle::sim::SimConfig cfg;
    cfg.n = n;
    cfg.L = L;
    cfg.nu = nu;
    cfg.maf_low = 0.05;
    cfg.maf_high = 0.4;
    cfg.seed = seed;
    return seagle::sim::make_replicate(cfg, 0);
}

}  // namespace testsupport
