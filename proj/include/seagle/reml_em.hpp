#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "seagle/linalg_core.hpp"

namespace seagle {

/// Variance components of the null model y = X beta + G b + eps.
struct VarianceComponents {
    double tau = 0.0;    // Var(b_l)
    double sigma = 0.0;  // Var(eps_i)
};

/**
 * REML EM settings.
 *
 * When tau0 / sigma0 are unset, fit_null starts from the method-of-moments
 * residual variance sigma0 = |u|^2 / (n - P) and tau0 = sigma0 / L.
 */
struct EmConfig {
    std::optional<double> tau0;
    std::optional<double> sigma0;
    double rel_tol = 1e-5;
    int max_iter = 500;
    double floor = 1e-10;
    bool record_trajectory = false;

    void validate() const;
};

struct NullFit {
    double tau_hat = 0.0;
    double sigma_hat = 0.0;
    int n_iter = 0;
    bool converged = false;
    // (tau_t, sigma_t) for t = 0..n_iter, filled when EmConfig::record_trajectory.
    std::vector<std::pair<double, double>> trajectory;
};

/**
 * The null model after projection onto range(X)^perp: u = A^T y and
 * A^T G, together with the quantities every EM step reuses (the Gram matrix
 * of A^T G and G^T A u). Built once per fit.
 */
class ProjectedNullModel {
public:
    ProjectedNullModel(VectorXd u, MatrixXd AtG);

    /// Woodbury operator for R = tau A^T G G^T A + sigma I_{n-P}; one Cholesky.
    WoodburyOperator operator_at(double tau, double sigma) const;

    const VectorXd& u() const noexcept { return u_; }
    const MatrixXd& AtG() const noexcept { return *atg_; }
    const VectorXd& AtG_u() const noexcept { return atg_u_; }
    const MatrixXd& gram() const noexcept { return *gram_; }
    Index dof() const noexcept { return u_.size(); }
    Index loci() const noexcept { return atg_->cols(); }

private:
    VectorXd u_;
    std::shared_ptr<const MatrixXd> atg_;
    std::shared_ptr<const MatrixXd> gram_;
    VectorXd atg_u_;
};

VectorXd project_response(const ImplicitProjector& proj, const VectorXd& y);

/// One REML EM update from (tau_t, sigma_t). Does not clamp.
VarianceComponents em_step(const ProjectedNullModel& model, double tau_t, double sigma_t);
VarianceComponents em_step(const VectorXd& u, const MatrixXd& AtG, double tau_t, double sigma_t);

/// Starting point used when EmConfig leaves tau0 / sigma0 unset.
VarianceComponents default_start(const VectorXd& u, Index loci, double floor);

/// Relative-change convergence measure shared by the fast and dense fits.
double relative_change(const VarianceComponents& prev, const VarianceComponents& next, double floor);

NullFit fit_null(const VectorXd& y, const MatrixXd& G, const MatrixXd& X, const EmConfig& cfg);
NullFit fit_null(const ProjectedNullModel& model, const EmConfig& cfg);

}  // namespace seagle
