#pragma once

#include <cstdint>
#include <memory>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/QR>

namespace seagle {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using MatrixRef = Eigen::Ref<const MatrixXd>;
using VectorRef = Eigen::Ref<const VectorXd>;

// -------------------------------------------------------------------------
// Woodbury operator
// -------------------------------------------------------------------------

/**
 * Implicit inverse of V = tau * G G^T + sigma * I_n.
 *
 * Products V^{-1} W are evaluated through the L x L capacitance matrix
 * M = I_L + (tau/sigma) G^T G, whose Cholesky factor is computed once at
 * construction. No n x n matrix is ever formed; one product costs
 * O(n L l + L^2 l) for an n x l right-hand side.
 *
 * The operator is immutable after construction and may be shared between
 * threads. The genotype matrix and its Gram matrix are held through shared
 * pointers so that rescaled operators (same G, new tau/sigma) reuse them.
 */
class WoodburyOperator {
public:
    WoodburyOperator(std::shared_ptr<const MatrixXd> G, double tau, double sigma);
    WoodburyOperator(const MatrixXd& G, double tau, double sigma);
    /// Reuse a precomputed Gram matrix; `gram` must equal G^T G.
    WoodburyOperator(std::shared_ptr<const MatrixXd> G,
                     std::shared_ptr<const MatrixXd> gram,
                     double tau,
                     double sigma);

    /// Same G and Gram matrix, new variance components; one L x L factorization.
    WoodburyOperator rescaled(double tau, double sigma) const;

    /// V^{-1} W.
    MatrixXd apply(const MatrixRef& W) const;

    /// V^{-1} W when G^T W has already been computed by the caller.
    MatrixXd apply(const MatrixRef& W, const MatrixRef& GtW) const;

    /// M^{-1} B via the two triangular solves against the cached factor.
    MatrixXd solve_capacitance(const MatrixRef& B) const;

    /// Lower-triangular Cholesky factor of M.
    MatrixXd chol_factor() const { return chol_.matrixL(); }
    const MatrixXd& gram() const { return *gram_; }
    const MatrixXd& genotypes() const { return *g_; }

    double tau() const noexcept { return tau_; }
    double sigma() const noexcept { return sigma_; }
    Index rows() const noexcept { return g_->rows(); }
    Index rank() const noexcept { return g_->cols(); }

private:
    void factor();

    std::shared_ptr<const MatrixXd> g_;
    std::shared_ptr<const MatrixXd> gram_;
    double tau_;
    double sigma_;
    Eigen::LLT<MatrixXd> chol_;
};

/// G^T G, symmetric, computed as a rank-L update.
std::shared_ptr<const MatrixXd> gram_matrix(const MatrixXd& G);

WoodburyOperator build_woodbury(const MatrixXd& G, double tau, double sigma);

MatrixXd apply_vinv(const WoodburyOperator& op, const MatrixRef& W);

// Number of capacitance-matrix Cholesky factorizations performed on the
// calling thread. Used to audit factor reuse.
std::uint64_t cholesky_count() noexcept;
void reset_cholesky_count() noexcept;

// -------------------------------------------------------------------------
// Implicit projector onto range(X)^perp
// -------------------------------------------------------------------------

/**
 * Full Householder QR of the covariate design X (n x P), kept in factored
 * form. Q = [Q1 A] is never materialized; A^T W is obtained by applying the
 * reflectors to W and keeping the trailing n - P rows.
 */
class ImplicitProjector {
public:
    /// Relative threshold on |diag(R0)| below which X is declared rank deficient.
    static constexpr double kRankTolerance = 1e-10;

    explicit ImplicitProjector(const MatrixRef& X);

    /// Q^T W (n x l).
    MatrixXd apply_qt(const MatrixRef& W) const;
    /// A^T W ((n-P) x l).
    MatrixXd apply_at(const MatrixRef& W) const;
    /// Q1^T W (P x l).
    MatrixXd apply_q1t(const MatrixRef& W) const;
    /// A Z for Z of shape (n-P) x l; result n x l.
    MatrixXd apply_a(const MatrixRef& Z) const;

    const MatrixXd& r0() const noexcept { return r0_; }
    Index n() const noexcept { return qr_.rows(); }
    Index p_cols() const noexcept { return qr_.cols(); }

private:
    Eigen::HouseholderQR<MatrixXd> qr_;
    MatrixXd r0_;
};

ImplicitProjector build_projector(const MatrixRef& X);

MatrixXd apply_at(const ImplicitProjector& proj, const MatrixRef& W);

}  // namespace seagle
