#include "doctest.h"

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include "seagle/errors.hpp"
#include "seagle/linalg_core.hpp"
#include "support.hpp"

using namespace seagle;
using testsupport::random_normal;
using testsupport::rel_err;

namespace {

MatrixXd dense_v(const MatrixXd& G, double tau, double sigma) {
    MatrixXd V = tau * G * G.transpose();
    V.diagonal().array() += sigma;
    return V;
}

}  // namespace

TEST_SUITE("linalg_core") {

TEST_CASE("zero genotypes give identity capacitance") {
    const WoodburyOperator op = build_woodbury(MatrixXd::Zero(7, 3), 1.0, 2.0);
    CHECK(op.chol_factor().isApprox(MatrixXd::Identity(3, 3), 0.0));
    const MatrixXd W = random_normal(7, 2, 1);
    CHECK((apply_vinv(op, W) - W / 2.0).norm() == doctest::Approx(0.0));
}

TEST_CASE("scalar gram of an all-ones column") {
    const WoodburyOperator op = build_woodbury(MatrixXd::Ones(4, 1), 1.0, 1.0);
    CHECK(op.chol_factor()(0, 0) == doctest::Approx(std::sqrt(5.0)).epsilon(1e-15));
}

TEST_CASE("cholesky factor reconstructs the capacitance matrix") {
    const MatrixXd G = random_normal(50, 5, 2);
    const double tau = 0.7, sigma = 1.3;
    const WoodburyOperator op = build_woodbury(G, tau, sigma);
    const MatrixXd Lc = op.chol_factor();
    MatrixXd M = MatrixXd::Identity(5, 5) + (tau / sigma) * G.transpose() * G;
    CHECK(rel_err(Lc * Lc.transpose(), M) < 1e-12);
    CHECK((Lc * Lc.transpose() - M).cwiseAbs().maxCoeff() < 1e-12 * M.cwiseAbs().maxCoeff());
}

TEST_CASE("apply_vinv inverts V times z") {
    const MatrixXd G = random_normal(40, 6, 3);
    const VectorXd z = random_normal(40, 1, 4);
    const WoodburyOperator op = build_woodbury(G, 0.9, 1.1);
    const VectorXd w = dense_v(G, 0.9, 1.1) * z;
    CHECK(rel_err(apply_vinv(op, w), z) < 1e-10);
}

TEST_CASE("apply_vinv matches dense inversion") {
    const MatrixXd G = random_normal(300, 20, 5);
    const MatrixXd W = random_normal(300, 3, 6);
    const WoodburyOperator op = build_woodbury(G, 0.4, 2.0);
    const MatrixXd ref = dense_v(G, 0.4, 2.0).llt().solve(W);
    CHECK(rel_err(apply_vinv(op, W), ref) < 1e-10);
}

TEST_CASE("woodbury identity on random instances") {
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<int> n_dist(5, 500), l_dist(1, 40), c_dist(1, 4);
    std::uniform_real_distribution<double> vc(0.05, 5.0);
    for (int rep = 0; rep < 25; ++rep) {
        const int n = n_dist(rng), L = l_dist(rng), l = c_dist(rng);
        const double tau = vc(rng), sigma = vc(rng);
        const MatrixXd G = random_normal(n, L, 100 + rep);
        const MatrixXd W = random_normal(n, l, 200 + rep);
        const MatrixXd ref = dense_v(G, tau, sigma).llt().solve(W);
        CHECK(rel_err(apply_vinv(build_woodbury(G, tau, sigma), W), ref) < 1e-9);
    }
}

TEST_CASE("repeated applications are bit-identical") {
    const MatrixXd G = random_normal(80, 9, 8);
    const MatrixXd W = random_normal(80, 4, 9);
    const WoodburyOperator op = build_woodbury(G, 1.0, 1.0);
    const MatrixXd a = apply_vinv(op, W);
    const MatrixXd b = apply_vinv(op, W);
    CHECK(a == b);
}

TEST_CASE("rescaled operator reuses G and matches a fresh build") {
    const MatrixXd G = random_normal(60, 7, 10);
    const MatrixXd W = random_normal(60, 2, 11);
    const WoodburyOperator a = build_woodbury(G, 1.0, 1.0).rescaled(0.3, 2.5);
    const WoodburyOperator b = build_woodbury(G, 0.3, 2.5);
    CHECK(rel_err(a.apply(W), b.apply(W)) < 1e-13);
}

TEST_CASE("woodbury argument errors") {
    const MatrixXd G = random_normal(10, 2, 12);
    CHECK_THROWS_AS(build_woodbury(G, 0.0, 1.0), ParameterError);
    CHECK_THROWS_AS(build_woodbury(G, 1.0, -1.0), ParameterError);
    CHECK_THROWS_AS(build_woodbury(G, std::nan(""), 1.0), ParameterError);
    CHECK_THROWS_AS(build_woodbury(MatrixXd(0, 2), 1.0, 1.0), ShapeError);
    const WoodburyOperator op = build_woodbury(G, 1.0, 1.0);
    CHECK_THROWS_AS(apply_vinv(op, MatrixXd::Ones(9, 1)), ShapeError);
}

TEST_CASE("ill-conditioned capacitance is reported") {
    MatrixXd G = MatrixXd::Constant(5, 2, 1e200);
    CHECK_THROWS_AS(build_woodbury(G, 1.0, 1.0), Error);
}

TEST_CASE("projector annihilates the design") {
    const MatrixXd X = testsupport::design(60, 13);
    const ImplicitProjector proj = build_projector(X);
    const MatrixXd AtX = apply_at(proj, X);
    CHECK(AtX.rows() == 57);
    CHECK(AtX.cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("energy split between range and complement") {
    const MatrixXd X = testsupport::design(50, 14);
    const ImplicitProjector proj = build_projector(X);
    const MatrixXd W = random_normal(50, 3, 15);
    const double split = proj.apply_at(W).squaredNorm() + proj.apply_q1t(W).squaredNorm();
    CHECK(rel_err(split, W.squaredNorm()) < 1e-12);
}

TEST_CASE("A A^T matches the dense orthogonal projector") {
    const MatrixXd X = testsupport::design(30, 16);
    const MatrixXd W = random_normal(30, 4, 17);
    const ImplicitProjector proj = build_projector(X);
    const MatrixXd dense = MatrixXd::Identity(30, 30) - X * (X.transpose() * X).ldlt().solve(X.transpose());
    CHECK((proj.apply_a(proj.apply_at(W)) - dense * W).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("projector is idempotent and A has orthonormal columns") {
    const MatrixXd X = testsupport::design(70, 18);
    const ImplicitProjector proj = build_projector(X);
    const VectorXd w = random_normal(70, 1, 19);
    const VectorXd once = proj.apply_a(proj.apply_at(w));
    const VectorXd twice = proj.apply_a(proj.apply_at(once));
    CHECK(rel_err(twice, once) < 1e-10);
    const VectorXd atw = proj.apply_at(w);
    CHECK(rel_err(proj.apply_at(proj.apply_a(atw)), atw) < 1e-10);
}

TEST_CASE("rank deficiency names the offending column") {
    MatrixXd X = testsupport::design(40, 20);
    X.conservativeResize(40, 4);
    X.col(3) = 2.0 * X.col(1) - X.col(0);
    try {
        build_projector(X);
        FAIL("expected RankError");
    } catch (const RankError& e) {
        CHECK(e.column() == 3);
    }
    CHECK_THROWS_AS(build_projector(MatrixXd::Ones(3, 3)), ShapeError);
}

TEST_CASE("projector shape errors") {
    const ImplicitProjector proj = build_projector(testsupport::design(20, 21));
    CHECK_THROWS_AS(apply_at(proj, MatrixXd::Ones(19, 1)), ShapeError);
}

}  // TEST_SUITE
