#include "seagle/oracle.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include "seagle/errors.hpp"

namespace seagle::oracle {

namespace {

void guard(Index n, const char* who) {
    if (n > kMaxDenseN) {
        std::ostringstream msg;
        msg << who << ": n=" << n << " exceeds the dense oracle limit " << kMaxDenseN;
        throw ParameterError(msg.str());
    }
}

MatrixXd dense_inverse(const MatrixXd& S, const char* who) {
    Eigen::LLT<MatrixXd> llt(S);
    if (llt.info() != Eigen::Success) {
        throw ConditioningError(std::string(who) + ": matrix is not positive definite");
    }
    return llt.solve(MatrixXd::Identity(S.rows(), S.cols()));
}

}  // namespace

MatrixXd dense_complement_basis(const MatrixXd& X) {
    const Index n = X.rows();
    const Index p = X.cols();
    if (n <= p) throw ShapeError("dense_complement_basis: need n > P");
    Eigen::HouseholderQR<MatrixXd> qr(X);
    const MatrixXd Q = qr.householderQ() * MatrixXd::Identity(n, n);
    return Q.rightCols(n - p);
}

DenseNullModel dense_null_model(const MatrixXd& G, const MatrixXd& X, double tau, double sigma) {
    guard(G.rows(), "dense_null_model");
    if (!(tau > 0.0) || !(sigma > 0.0)) {
        throw ParameterError("dense_null_model: tau and sigma must be positive");
    }
    DenseNullModel m;
    m.V = tau * G * G.transpose();
    m.V.diagonal().array() += sigma;
    m.Vinv = dense_inverse(m.V, "dense_null_model(V)");
    const MatrixXd VinvX = m.Vinv * X;
    const MatrixXd gamma_inv = dense_inverse(X.transpose() * VinvX, "dense_null_model(X^T V^-1 X)");
    m.P_mat = m.Vinv - VinvX * gamma_inv * VinvX.transpose();
    m.P_mat = 0.5 * (m.P_mat + m.P_mat.transpose()).eval();
    m.A_dense = dense_complement_basis(X);
    return m;
}

ScoreStatistic dense_statistic(const TestInput& input, double tau, double sigma) {
    guard(input.n(), "dense_statistic");
    const DenseNullModel m = dense_null_model(input.G(), input.X(), tau, sigma);
    ScoreStatistic s;
    s.t = input.G_tilde().transpose() * (m.P_mat * input.y());
    s.T = 0.5 * s.t.squaredNorm();
    return s;
}

std::vector<double> dense_eigen_weights(const TestInput& input, double tau, double sigma) {
    guard(input.n(), "dense_eigen_weights");
    const DenseNullModel m = dense_null_model(input.G(), input.X(), tau, sigma);
    Eigen::SelfAdjointEigenSolver<MatrixXd> v_eig(m.V);
    if (v_eig.info() != Eigen::Success) throw NumericalError("dense_eigen_weights: V eigensolve failed");
    const MatrixXd v_half = v_eig.operatorSqrt();
    const MatrixXd C1 = (v_half * (m.P_mat * input.G_tilde())) / std::sqrt(2.0);
    const MatrixXd C = C1 * C1.transpose();
    Eigen::SelfAdjointEigenSolver<MatrixXd> c_eig(C, Eigen::EigenvaluesOnly);
    if (c_eig.info() != Eigen::Success) throw NumericalError("dense_eigen_weights: C eigensolve failed");
    const VectorXd& ev = c_eig.eigenvalues();
    return truncate_spectrum(std::vector<double>(ev.data(), ev.data() + ev.size()));
}

VarianceComponents dense_em_step(const VectorXd& u, const MatrixXd& AtG, double tau, double sigma) {
    guard(u.size(), "dense_em_step");
    const double m = static_cast<double>(u.size());
    const double L = static_cast<double>(AtG.cols());
    MatrixXd R = tau * AtG * AtG.transpose();
    R.diagonal().array() += sigma;
    const MatrixXd Rinv = dense_inverse(R, "dense_em_step(R)");
    const VectorXd r = Rinv * u;
    const VectorXd s = AtG.transpose() * r;
    const double tr_k = (AtG.transpose() * Rinv * AtG).trace();

    VarianceComponents next;
    next.tau = (tau * tau * s.squaredNorm() + tau * L - tau * tau * tr_k) / L;
    next.sigma = (sigma * sigma * r.squaredNorm() + sigma * m - sigma * sigma * Rinv.trace()) / m;
    if (!std::isfinite(next.tau) || !std::isfinite(next.sigma)) {
        throw NumericalError("dense_em_step: non-finite update");
    }
    return next;
}

NullFit dense_em_fit(const VectorXd& y, const MatrixXd& G, const MatrixXd& X, const EmConfig& cfg) {
    guard(y.size(), "dense_em_fit");
    cfg.validate();
    const MatrixXd A = dense_complement_basis(X);
    const VectorXd u = A.transpose() * y;
    const MatrixXd AtG = A.transpose() * G;

    VarianceComponents cur = default_start(u, G.cols(), cfg.floor);
    if (cfg.tau0) cur.tau = *cfg.tau0;
    if (cfg.sigma0) cur.sigma = *cfg.sigma0;

    NullFit fit;
    if (cfg.record_trajectory) fit.trajectory.emplace_back(cur.tau, cur.sigma);
    for (int t = 1; t <= cfg.max_iter; ++t) {
        VarianceComponents next = dense_em_step(u, AtG, cur.tau, cur.sigma);
        next.tau = std::max(next.tau, cfg.floor);
        next.sigma = std::max(next.sigma, cfg.floor);
        const double change = relative_change(cur, next, cfg.floor);
        cur = next;
        fit.n_iter = t;
        if (cfg.record_trajectory) fit.trajectory.emplace_back(cur.tau, cur.sigma);
        if (change < cfg.rel_tol) {
            fit.converged = true;
            break;
        }
    }
    fit.tau_hat = cur.tau;
    fit.sigma_hat = cur.sigma;
    return fit;
}

VcTestResult dense_run_test(const TestInput& input, const EmConfig& cfg, const VcTestOptions& opts) {
    const NullFit fit = dense_em_fit(input.y(), input.G(), input.X(), cfg);
    VcTestResult out;
    out.tau_hat = fit.tau_hat;
    out.sigma_hat = fit.sigma_hat;
    out.n_iter = fit.n_iter;
    out.converged = fit.converged;
    out.statistic_T = dense_statistic(input, fit.tau_hat, fit.sigma_hat).T;
    out.lambdas = dense_eigen_weights(input, fit.tau_hat, fit.sigma_hat);
    assign_pvalues(out.statistic_T, out.lambdas, opts, out);
    return out;
}

}  // namespace seagle::oracle
