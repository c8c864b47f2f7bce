#include "doctest.h"

#include <numeric>

#include "seagle/errors.hpp"
#include "seagle/oracle.hpp"
#include "support.hpp"

using namespace seagle;
using testsupport::rel_err;

TEST_SUITE("oracle") {

TEST_CASE("dense projector properties") {
    const TestInput in = testsupport::instance(120, 9, 1);
    const auto m = oracle::dense_null_model(in.G(), in.X(), 0.7, 1.3);
    const MatrixXd& P = m.P_mat;
    CHECK((P - P.transpose()).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((P * m.V * P - P).cwiseAbs().maxCoeff() < 1e-9 * P.cwiseAbs().maxCoeff());
    CHECK((P * in.X()).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((m.V - m.V.transpose()).cwiseAbs().maxCoeff() == 0.0);
    CHECK((m.A_dense.transpose() * m.A_dense - MatrixXd::Identity(117, 117)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("size guard") {
    const Index n = oracle::kMaxDenseN + 1;
    const TestInput in(VectorXd::Ones(n), testsupport::design(n, 2), 2, MatrixXd::Ones(n, 1));
    CHECK_THROWS_AS(oracle::dense_statistic(in, 1.0, 1.0), ParameterError);
    CHECK_THROWS_AS(oracle::dense_eigen_weights(in, 1.0, 1.0), ParameterError);
    CHECK_THROWS_AS(oracle::dense_em_fit(in.y(), in.G(), in.X(), EmConfig{}), ParameterError);
}

TEST_CASE("fixed-effect response gives T = 0") {
    const TestInput base = testsupport::instance(90, 6, 3);
    const TestInput in(base.X() * VectorXd::Constant(3, 2.0), base.X(), 2, base.G());
    CHECK(oracle::dense_statistic(in, 1.0, 1.0).T < 1e-18);
}

TEST_CASE("statistic is continuous as tau approaches zero") {
    const TestInput in = testsupport::instance(150, 8, 4, 0.2);
    const double a = oracle::dense_statistic(in, 1e-12, 1.0).T;
    const double b = oracle::dense_statistic(in, 1e-10, 1.0).T;
    CHECK(rel_err(a, b) < 1e-4);
}

TEST_CASE("dense and fast statistics agree on many instances") {
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        const Index n = 40 + static_cast<Index>(seed % 60);
        const TestInput in = testsupport::instance(n, 3 + static_cast<Index>(seed % 7), 500 + seed, 0.1);
        const double tau = 0.2 + 0.01 * static_cast<double>(seed % 50);
        CHECK(rel_err(score_statistic(in, tau, 1.0).T, oracle::dense_statistic(in, tau, 1.0).T) < 1e-10);
    }
}

TEST_CASE("dense eigen weights: zero design, trace and L x L route") {
    const TestInput base = testsupport::instance(80, 6, 5);
    CHECK(oracle::dense_eigen_weights(TestInput(base.y(), base.X(), 2, MatrixXd::Zero(80, 6)), 1.0, 1.0).empty());
    const std::vector<double> w = oracle::dense_eigen_weights(base, 0.4, 0.9);
    CHECK(rel_err(std::accumulate(w.begin(), w.end(), 0.0), reduced_kernel(base, 0.4, 0.9).trace()) < 1e-9);
    const std::vector<double> fast = eigen_weights(base, 0.4, 0.9);
    REQUIRE(w.size() == fast.size());
    for (std::size_t k = 0; k < w.size(); ++k) CHECK(rel_err(fast[k], w[k]) < 1e-8);
}

TEST_CASE("dense EM: closed-form sigma step and determinism") {
    const VectorXd u = testsupport::random_normal(50, 1, 6);
    const VarianceComponents s = oracle::dense_em_step(u, MatrixXd::Zero(50, 3), 0.4, 2.0);
    CHECK(s.tau == doctest::Approx(0.4).epsilon(1e-14));
    CHECK(s.sigma == doctest::Approx(u.squaredNorm() / 50.0).epsilon(1e-13));

    const TestInput in = testsupport::instance(100, 5, 7);
    EmConfig cfg;
    cfg.record_trajectory = true;
    const NullFit a = oracle::dense_em_fit(in.y(), in.G(), in.X(), cfg);
    const NullFit b = oracle::dense_em_fit(in.y(), in.G(), in.X(), cfg);
    CHECK(a.trajectory == b.trajectory);
}

}  // TEST_SUITE
