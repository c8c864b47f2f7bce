#pragma once

#include <vector>

#include "seagle/reml_em.hpp"
#include "seagle/vc_test.hpp"

// Dense O(n^3) reference implementations. Every n x n matrix is formed
// explicitly; intended for tests and small instances only.
namespace seagle::oracle {

inline constexpr Index kMaxDenseN = 2000;

struct DenseNullModel {
    MatrixXd V;
    MatrixXd Vinv;
    MatrixXd P_mat;
    MatrixXd A_dense;  // n x (n - P), orthonormal basis of range(X)^perp
};

DenseNullModel dense_null_model(const MatrixXd& G, const MatrixXd& X, double tau, double sigma);

/// Explicit A from a dense Householder QR of X.
MatrixXd dense_complement_basis(const MatrixXd& X);

ScoreStatistic dense_statistic(const TestInput& input, double tau, double sigma);

/// Eigenvalues of C1 C1^T with C1 = V^{1/2} P G~ / sqrt(2), truncated like the fast path.
std::vector<double> dense_eigen_weights(const TestInput& input, double tau, double sigma);

/// One EM update with R = tau A^T G G^T A + sigma I inverted explicitly.
VarianceComponents dense_em_step(const VectorXd& u, const MatrixXd& AtG, double tau, double sigma);

NullFit dense_em_fit(const VectorXd& y, const MatrixXd& G, const MatrixXd& X, const EmConfig& cfg);

/// Full dense pipeline: dense EM, dense statistic, dense spectrum, shared p-value code.
VcTestResult dense_run_test(const TestInput& input, const EmConfig& cfg, const VcTestOptions& opts = {});

}  // namespace seagle::oracle
