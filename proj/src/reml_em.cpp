#include "seagle/reml_em.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "seagle/errors.hpp"

namespace seagle {

void EmConfig::validate() const {
    if (!(rel_tol > 0.0 && rel_tol < 1.0)) {
        throw ParameterError("EmConfig: rel_tol must lie in (0, 1)");
    }
    if (max_iter < 1) {
        throw ParameterError("EmConfig: max_iter must be >= 1");
    }
    if (!(floor > 0.0)) {
        throw ParameterError("EmConfig: floor must be positive");
    }
    if (tau0 && !(*tau0 > floor)) {
        throw ParameterError("EmConfig: tau0 must exceed floor");
    }
    if (sigma0 && !(*sigma0 > floor)) {
        throw ParameterError("EmConfig: sigma0 must exceed floor");
    }
}

ProjectedNullModel::ProjectedNullModel(VectorXd u, MatrixXd AtG)
    : u_(std::move(u)), atg_(std::make_shared<const MatrixXd>(std::move(AtG))) {
    if (atg_->rows() != u_.size()) {
        throw ShapeError("ProjectedNullModel: A^T G and u must have the same row count");
    }
    if (atg_->cols() < 1) {
        throw ShapeError("ProjectedNullModel: need at least one locus");
    }
    gram_ = gram_matrix(*atg_);
    atg_u_ = atg_->transpose() * u_;
}

WoodburyOperator ProjectedNullModel::operator_at(double tau, double sigma) const {
    return WoodburyOperator(atg_, gram_, tau, sigma);
}

VectorXd project_response(const ImplicitProjector& proj, const VectorXd& y) {
    return proj.apply_at(y);
}

// The Woodbury form of R = tau A^T G G^T A + sigma I reduces both traces in
// the updates to the L x L capacitance matrix M = I + (tau/sigma) S with
// S = G^T A A^T G:
//   tau * tr(G^T A R^{-1} A^T G) = (tau/sigma) tr(M^{-1} S) = L - tr(M^{-1}).
// Each quantity is taken from whichever side avoids cancellation.
VarianceComponents em_step(const ProjectedNullModel& model, double tau_t, double sigma_t) {
    const WoodburyOperator op = model.operator_at(tau_t, sigma_t);
    const Index L = model.loci();
    const double dof = static_cast<double>(model.dof());
    const double ratio = tau_t / sigma_t;

    const VectorXd r = op.apply(model.u(), model.AtG_u());  // R^{-1} u
    const VectorXd s = model.AtG().transpose() * r;          // G^T A R^{-1} u
    const MatrixXd m_inv = op.solve_capacitance(MatrixXd::Identity(L, L));
    const double tr_m_inv = m_inv.trace();
    const double tr_m_inv_gram = m_inv.cwiseProduct(model.gram()).sum();

    VarianceComponents next;
    next.tau = tau_t / static_cast<double>(L) * (tau_t * s.squaredNorm() + tr_m_inv);
    next.sigma = (sigma_t * sigma_t * r.squaredNorm() + sigma_t * ratio * tr_m_inv_gram) / dof;

    if (!std::isfinite(next.tau) || !std::isfinite(next.sigma)) {
        std::ostringstream msg;
        msg << "em_step: non-finite update from (tau=" << tau_t << ", sigma=" << sigma_t
            << ") -> (tau=" << next.tau << ", sigma=" << next.sigma << ")";
        throw NumericalError(msg.str());
    }
    return next;
}

VarianceComponents em_step(const VectorXd& u, const MatrixXd& AtG, double tau_t, double sigma_t) {
    return em_step(ProjectedNullModel(u, AtG), tau_t, sigma_t);
}

VarianceComponents default_start(const VectorXd& u, Index loci, double floor) {
    VarianceComponents start;
    start.sigma = std::max(u.squaredNorm() / static_cast<double>(u.size()), floor);
    start.tau = std::max(start.sigma / static_cast<double>(loci), floor);
    return start;
}

double relative_change(const VarianceComponents& prev, const VarianceComponents& next, double floor) {
    const double dtau = std::abs(next.tau - prev.tau) / std::max(prev.tau, floor);
    const double dsigma = std::abs(next.sigma - prev.sigma) / std::max(prev.sigma, floor);
    return std::max(dtau, dsigma);
}

NullFit fit_null(const ProjectedNullModel& model, const EmConfig& cfg) {
    cfg.validate();
    VarianceComponents cur = default_start(model.u(), model.loci(), cfg.floor);
    if (cfg.tau0) cur.tau = *cfg.tau0;
    if (cfg.sigma0) cur.sigma = *cfg.sigma0;

    NullFit fit;
    if (cfg.record_trajectory) {
        fit.trajectory.reserve(static_cast<std::size_t>(std::min(cfg.max_iter, 1000)) + 1);
        fit.trajectory.emplace_back(cur.tau, cur.sigma);
    }
    for (int t = 1; t <= cfg.max_iter; ++t) {
        VarianceComponents next = em_step(model, cur.tau, cur.sigma);
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

NullFit fit_null(const VectorXd& y, const MatrixXd& G, const MatrixXd& X, const EmConfig& cfg) {
    if (y.size() != X.rows() || G.rows() != X.rows()) {
        std::ostringstream msg;
        msg << "fit_null: row mismatch (y=" << y.size() << ", G=" << G.rows()
            << ", X=" << X.rows() << ")";
        throw ShapeError(msg.str());
    }
    cfg.validate();
    const ImplicitProjector proj(X);
    ProjectedNullModel model(project_response(proj, y), proj.apply_at(G));
    return fit_null(model, cfg);
}

}  // namespace seagle
