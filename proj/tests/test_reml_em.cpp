#include "doctest.h"

#include <numeric>

#include "seagle/errors.hpp"
#include "seagle/oracle.hpp"
#include "seagle/reml_em.hpp"
#include "support.hpp"

using namespace seagle;
using testsupport::random_normal;
using testsupport::rel_err;

TEST_SUITE("reml_em") {

TEST_CASE("projected response of a fitted-value vector vanishes") {
    const MatrixXd X = testsupport::design(40, 1);
    const ImplicitProjector proj = build_projector(X);
    const VectorXd y = X * VectorXd::LinSpaced(3, -1.0, 2.0);
    CHECK(project_response(proj, y).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("projection is an isometry on the complement") {
    const MatrixXd X = testsupport::design(40, 2);
    const ImplicitProjector proj = build_projector(X);
    const VectorXd r = random_normal(40, 1, 3);
    const VectorXd y = r - X * (X.transpose() * X).ldlt().solve(X.transpose() * r);
    CHECK(rel_err(project_response(proj, y).norm(), y.norm()) < 1e-12);
}

TEST_CASE("projected response matches an explicit dense QR") {
    const MatrixXd X = testsupport::design(25, 4);
    const VectorXd y = random_normal(25, 1, 5);
    const MatrixXd A = oracle::dense_complement_basis(X);
    CHECK(rel_err(project_response(build_projector(X), y), A.transpose() * y) < 1e-12);
}

TEST_CASE("em_step with A^T G = 0 collapses to the residual variance") {
    const VectorXd u = random_normal(37, 1, 6);
    const VarianceComponents next = em_step(u, MatrixXd::Zero(37, 4), 0.8, 3.0);
    CHECK(next.tau == doctest::Approx(0.8).epsilon(1e-14));
    CHECK(next.sigma == doctest::Approx(u.squaredNorm() / 37.0).epsilon(1e-13));
}

TEST_CASE("em_step shrinks tau when u = 0") {
    const MatrixXd AtG = random_normal(37, 5, 7);
    const VarianceComponents next = em_step(VectorXd::Zero(37), AtG, 0.5, 1.0);
    CHECK(next.tau < 0.5);
    const VarianceComponents dense = oracle::dense_em_step(VectorXd::Zero(37), AtG, 0.5, 1.0);
    CHECK(rel_err(next.tau, dense.tau) < 1e-10);
}

TEST_CASE("em_step matches the dense update") {
    const MatrixXd X = testsupport::design(40, 8);
    const MatrixXd G = random_normal(40, 5, 9);
    const VectorXd y = random_normal(40, 1, 10);
    const ImplicitProjector proj = build_projector(X);
    const VectorXd u = project_response(proj, y);
    const MatrixXd AtG = proj.apply_at(G);
    for (auto [tau, sigma] : {std::pair{0.3, 1.2}, std::pair{2.0, 0.5}, std::pair{1e-4, 1.0}}) {
        const VarianceComponents fast = em_step(u, AtG, tau, sigma);
        const VarianceComponents dense = oracle::dense_em_step(u, AtG, tau, sigma);
        CHECK(rel_err(fast.tau, dense.tau) < 1e-10);
        CHECK(rel_err(fast.sigma, dense.sigma) < 1e-10);
    }
}

TEST_CASE("em_step rejects invalid variance components") {
    CHECK_THROWS_AS(em_step(VectorXd::Ones(5), MatrixXd::Ones(5, 2), 0.0, 1.0), ParameterError);
}

TEST_CASE("iterate sequence matches the dense EM") {
    EmConfig cfg;
    cfg.record_trajectory = true;
    for (std::uint64_t seed = 11; seed < 16; ++seed) {
        const TestInput in = testsupport::instance(150 + 50 * static_cast<Index>(seed - 11), 12, seed);
        const NullFit fast = fit_null(in.y(), in.G(), in.X(), cfg);
        const NullFit dense = oracle::dense_em_fit(in.y(), in.G(), in.X(), cfg);
        REQUIRE(fast.trajectory.size() == dense.trajectory.size());
        CHECK(fast.n_iter == dense.n_iter);
        for (std::size_t t = 0; t < fast.trajectory.size(); ++t) {
            CHECK(rel_err(fast.trajectory[t].first, dense.trajectory[t].first) < 1e-8);
            CHECK(rel_err(fast.trajectory[t].second, dense.trajectory[t].second) < 1e-8);
        }
    }
}

TEST_CASE("fitting is deterministic") {
    const TestInput in = testsupport::instance(300, 20, 17);
    EmConfig cfg;
    cfg.record_trajectory = true;
    const NullFit a = fit_null(in.y(), in.G(), in.X(), cfg);
    const NullFit b = fit_null(in.y(), in.G(), in.X(), cfg);
    CHECK(a.tau_hat == b.tau_hat);
    CHECK(a.sigma_hat == b.sigma_hat);
    CHECK(a.n_iter == b.n_iter);
    CHECK(a.trajectory == b.trajectory);
}

TEST_CASE("iterates are invariant to fixed effects in y") {
    const TestInput in = testsupport::instance(200, 10, 18);
    EmConfig cfg;
    cfg.record_trajectory = true;
    const VectorXd shifted = in.y() + in.X() * VectorXd::Constant(3, 5.0);
    const NullFit a = fit_null(in.y(), in.G(), in.X(), cfg);
    const NullFit b = fit_null(shifted, in.G(), in.X(), cfg);
    REQUIRE(a.trajectory.size() == b.trajectory.size());
    for (std::size_t t = 0; t < a.trajectory.size(); ++t) {
        CHECK(rel_err(b.trajectory[t].first, a.trajectory[t].first) < 1e-10);
        CHECK(rel_err(b.trajectory[t].second, a.trajectory[t].second) < 1e-10);
    }
}

TEST_CASE("one cholesky factorization per iteration") {
    const TestInput in = testsupport::instance(200, 10, 19);
    const ImplicitProjector proj(in.X());
    const ProjectedNullModel model(project_response(proj, in.y()), proj.apply_at(in.G()));
    reset_cholesky_count();
    const NullFit fit = fit_null(model, EmConfig{});
    CHECK(cholesky_count() == static_cast<std::uint64_t>(fit.n_iter));
}

TEST_CASE("iterates stay above the floor and convergence is honoured") {
    EmConfig cfg;
    cfg.record_trajectory = true;
    cfg.floor = 1e-6;
    const MatrixXd X = testsupport::design(200, 20);
    const MatrixXd G = random_normal(200, 8, 21);
    const VectorXd y = X.rowwise().sum() + random_normal(200, 1, 22);
    const NullFit fit = fit_null(y, G, X, cfg);
    for (const auto& [tau, sigma] : fit.trajectory) {
        CHECK(tau >= cfg.floor);
        CHECK(sigma >= cfg.floor);
    }
    if (fit.converged) {
        const auto& last = fit.trajectory.back();
        const auto& prev = fit.trajectory[fit.trajectory.size() - 2];
        CHECK(relative_change({prev.first, prev.second}, {last.first, last.second}, cfg.floor) < cfg.rel_tol);
    }
}

TEST_CASE("max_iter exhaustion is reported, not thrown") {
    const TestInput in = testsupport::instance(200, 10, 23);
    EmConfig cfg;
    cfg.max_iter = 1;
    cfg.rel_tol = 1e-14;
    const NullFit fit = fit_null(in.y(), in.G(), in.X(), cfg);
    CHECK_FALSE(fit.converged);
    CHECK(fit.n_iter == 1);
}

TEST_CASE("pure noise: sigma recovered and tau pushed toward the floor") {
    const int reps = 200;
    std::vector<double> sig, tau;
    for (int r = 0; r < reps; ++r) {
        const MatrixXd X = testsupport::design(300, 1000 + r);
        const MatrixXd G = sim::gen_genotypes(300, 10, 0.05, 0.4, static_cast<std::uint64_t>(2000 + r));
        const VectorXd y = X.rowwise().sum() + random_normal(300, 1, 3000 + r);
        const NullFit fit = fit_null(y, G, X, EmConfig{});
        sig.push_back(fit.sigma_hat);
        tau.push_back(fit.tau_hat);
    }
    const double mean = std::accumulate(sig.begin(), sig.end(), 0.0) / reps;
    double var = 0.0;
    for (double s : sig) var += (s - mean) * (s - mean);
    const double se = std::sqrt(var / (reps - 1) / reps);
    CHECK(std::abs(mean - 1.0) < 3.0 * se);
    // Start is sigma0 / L = 0.1; the estimates must move well below it.
    const double tau_mean = std::accumulate(tau.begin(), tau.end(), 0.0) / reps;
    CHECK(tau_mean < 0.02);
}

TEST_CASE("config validation") {
    EmConfig cfg;
    cfg.rel_tol = 1.5;
    CHECK_THROWS_AS(cfg.validate(), ParameterError);
    cfg = EmConfig{};
    cfg.max_iter = 0;
    CHECK_THROWS_AS(cfg.validate(), ParameterError);
    cfg = EmConfig{};
    cfg.tau0 = 1e-12;
    CHECK_THROWS_AS(cfg.validate(), ParameterError);
}

TEST_CASE("rank-deficient design propagates") {
    MatrixXd X = testsupport::design(50, 24);
    X.col(2) = X.col(1);
    CHECK_THROWS_AS(fit_null(random_normal(50, 1, 25), random_normal(50, 3, 26), X, EmConfig{}), RankError);
}

}  // TEST_SUITE
