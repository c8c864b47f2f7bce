#include "seagle/linalg_core.hpp"

#include <cmath>
#include <sstream>

#include "seagle/errors.hpp"

namespace seagle {

namespace {

thread_local std::uint64_t g_cholesky_count = 0;

void check_components(double tau, double sigma) {
    if (!(tau > 0.0) || !std::isfinite(tau)) {
        std::ostringstream msg;
        msg << "woodbury: tau must be positive and finite, got " << tau;
        throw ParameterError(msg.str());
    }
    if (!(sigma > 0.0) || !std::isfinite(sigma)) {
        std::ostringstream msg;
        msg << "woodbury: sigma must be positive and finite, got " << sigma;
        throw ParameterError(msg.str());
    }
}

std::shared_ptr<const MatrixXd> checked_genotypes(std::shared_ptr<const MatrixXd> G) {
    if (!G || G->rows() < 1 || G->cols() < 1) {
        throw ShapeError("woodbury: G must have at least one row and one column");
    }
    if (!G->allFinite()) {
        throw ParameterError("woodbury: G contains non-finite entries");
    }
    return G;
}

}  // namespace

// -------------------------------------------------------------------------
// WoodburyOperator
// -------------------------------------------------------------------------

WoodburyOperator::WoodburyOperator(std::shared_ptr<const MatrixXd> G, double tau, double sigma)
    : g_(checked_genotypes(std::move(G))), tau_(tau), sigma_(sigma) {
    check_components(tau, sigma);
    gram_ = gram_matrix(*g_);
    factor();
}

WoodburyOperator::WoodburyOperator(const MatrixXd& G, double tau, double sigma)
    : WoodburyOperator(std::make_shared<const MatrixXd>(G), tau, sigma) {}

WoodburyOperator::WoodburyOperator(std::shared_ptr<const MatrixXd> G,
                                   std::shared_ptr<const MatrixXd> gram,
                                   double tau,
                                   double sigma)
    : g_(checked_genotypes(std::move(G))), gram_(std::move(gram)), tau_(tau), sigma_(sigma) {
    check_components(tau, sigma);
    if (!gram_ || gram_->rows() != g_->cols() || gram_->cols() != g_->cols()) {
        throw ShapeError("woodbury: Gram matrix must be L x L");
    }
    factor();
}

WoodburyOperator WoodburyOperator::rescaled(double tau, double sigma) const {
    return WoodburyOperator(g_, gram_, tau, sigma);
}

void WoodburyOperator::factor() {
    const Index L = g_->cols();
    MatrixXd M = (tau_ / sigma_) * (*gram_);
    M.diagonal().array() += 1.0;
    ++g_cholesky_count;
    chol_.compute(M);
    if (chol_.info() != Eigen::Success || !chol_.matrixLLT().allFinite()) {
        std::ostringstream msg;
        msg << "woodbury: Cholesky factorization of the " << L << "x" << L
            << " capacitance matrix M = I + (tau/sigma) G^T G failed (tau=" << tau_
            << ", sigma=" << sigma_ << ")";
        throw ConditioningError(msg.str());
    }
}

MatrixXd WoodburyOperator::apply(const MatrixRef& W) const {
    if (W.rows() != g_->rows()) {
        std::ostringstream msg;
        msg << "apply_vinv: right-hand side has " << W.rows() << " rows, operator has "
            << g_->rows();
        throw ShapeError(msg.str());
    }
    const MatrixXd GtW = g_->transpose() * W;
    return apply(W, GtW);
}

MatrixXd WoodburyOperator::apply(const MatrixRef& W, const MatrixRef& GtW) const {
    if (W.rows() != g_->rows() || GtW.rows() != g_->cols() || GtW.cols() != W.cols()) {
        throw ShapeError("apply_vinv: inconsistent shapes for W and G^T W");
    }
    const double ratio = tau_ / sigma_;
    const MatrixXd X2 = chol_.solve(GtW);
    MatrixXd out = W;
    out.noalias() -= ratio * ((*g_) * X2);
    out /= sigma_;
    return out;
}

MatrixXd WoodburyOperator::solve_capacitance(const MatrixRef& B) const {
    if (B.rows() != g_->cols()) {
        throw ShapeError("solve_capacitance: row count must equal L");
    }
    return chol_.solve(B);
}

std::shared_ptr<const MatrixXd> gram_matrix(const MatrixXd& G) {
    auto gram = std::make_shared<MatrixXd>(MatrixXd::Zero(G.cols(), G.cols()));
    gram->selfadjointView<Eigen::Lower>().rankUpdate(G.transpose());
    *gram = gram->selfadjointView<Eigen::Lower>();
    return gram;
}

WoodburyOperator build_woodbury(const MatrixXd& G, double tau, double sigma) {
    return WoodburyOperator(G, tau, sigma);
}

MatrixXd apply_vinv(const WoodburyOperator& op, const MatrixRef& W) {
    return op.apply(W);
}

std::uint64_t cholesky_count() noexcept {
    return g_cholesky_count;
}

void reset_cholesky_count() noexcept {
    g_cholesky_count = 0;
}

// -------------------------------------------------------------------------
// ImplicitProjector
// -------------------------------------------------------------------------

ImplicitProjector::ImplicitProjector(const MatrixRef& X) {
    const Index n = X.rows();
    const Index P = X.cols();
    if (P < 1 || n <= P) {
        std::ostringstream msg;
        msg << "build_projector: need n > P >= 1, got n=" << n << ", P=" << P;
        throw ShapeError(msg.str());
    }
    if (!X.allFinite()) {
        throw ParameterError("build_projector: covariate design contains non-finite entries");
    }
    qr_.compute(X);
    r0_ = qr_.matrixQR().topRows(P).triangularView<Eigen::Upper>();

    const VectorXd diag = r0_.diagonal().cwiseAbs();
    const double max_diag = diag.maxCoeff();
    for (Index j = 0; j < P; ++j) {
        if (!(max_diag > 0.0) || diag(j) < kRankTolerance * max_diag) {
            std::ostringstream msg;
            msg << "build_projector: covariate design is numerically rank deficient at column "
                << j << " (|R0(" << j << "," << j << ")| = " << diag(j)
                << ", max = " << max_diag << ")";
            throw RankError(msg.str(), static_cast<long>(j));
        }
    }
}

MatrixXd ImplicitProjector::apply_qt(const MatrixRef& W) const {
    if (W.rows() != n()) {
        std::ostringstream msg;
        msg << "apply_at: right-hand side has " << W.rows() << " rows, projector has " << n();
        throw ShapeError(msg.str());
    }
    MatrixXd out = W;
    out.applyOnTheLeft(qr_.householderQ().adjoint());
    return out;
}

MatrixXd ImplicitProjector::apply_at(const MatrixRef& W) const {
    return apply_qt(W).bottomRows(n() - p_cols());
}

MatrixXd ImplicitProjector::apply_q1t(const MatrixRef& W) const {
    return apply_qt(W).topRows(p_cols());
}

MatrixXd ImplicitProjector::apply_a(const MatrixRef& Z) const {
    if (Z.rows() != n() - p_cols()) {
        throw ShapeError("apply_a: expected n - P rows");
    }
    MatrixXd out = MatrixXd::Zero(n(), Z.cols());
    out.bottomRows(Z.rows()) = Z;
    out.applyOnTheLeft(qr_.householderQ());
    return out;
}

ImplicitProjector build_projector(const MatrixRef& X) {
    return ImplicitProjector(X);
}

MatrixXd apply_at(const ImplicitProjector& proj, const MatrixRef& W) {
    return proj.apply_at(W);
}

}  // namespace seagle
