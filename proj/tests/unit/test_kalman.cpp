#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <Eigen/Eigenvalues>

#include "covsteer/kalman.hpp"
#include "support.hpp"

using namespace covsteer;
using testing::max_abs;

namespace {

Matrix s(double v) { return Matrix::Constant(1, 1, v); }

double min_eig(const Matrix& m) {
    return Eigen::SelfAdjointEigenSolver<Matrix>(0.5 * (m + m.transpose())).eigenvalues()(0);
}

using LMatrix = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;

}  // namespace

TEST_CASE("predict_error_cov") {
    const Matrix P = testing::Gen(1).spd(3);
    CHECK(max_abs(kalman::predict_error_cov(P, Matrix::Identity(3, 3), Matrix::Zero(3, 3)) - P) == 0.0);
    CHECK(kalman::predict_error_cov(s(1), s(2), s(1))(0, 0) == doctest::Approx(5.0));
}

TEST_CASE("kalman_gain") {
    const auto zero = kalman::kalman_gain(Matrix::Zero(2, 2), Matrix::Identity(2, 2), Matrix::Identity(2, 2));
    CHECK(max_abs(zero.gain) == 0.0);
    CHECK(kalman::kalman_gain(s(1), s(1), s(1)).gain(0, 0) == doctest::Approx(0.5));
    for (double eps : {1e-3, 0.1, 2.0}) {
        const auto r = kalman::kalman_gain(Matrix::Identity(3, 3), Matrix::Identity(3, 3), eps * Matrix::Identity(3, 3));
        CHECK(max_abs(r.gain - Matrix::Identity(3, 3) / (1.0 + eps * eps)) < 1e-12);
    }
}

TEST_CASE("ill-conditioned innovation covariance is rejected") {
    Matrix C = Matrix::Identity(2, 2);
    Matrix D = Matrix::Identity(2, 2);
    D(1, 1) = 1e-7;
    Matrix P = Matrix::Identity(2, 2);
    P(1, 1) = 0.0;
    CHECK_THROWS_AS(kalman::kalman_gain(P, C, D), IllPosedObservation);
}

TEST_CASE("update_error_cov") {
    const Matrix P = testing::Gen(2).spd(3);
    const Matrix C = testing::Gen(3).matrix(2, 3);
    CHECK(max_abs(kalman::update_error_cov(P, Matrix::Zero(3, 2), C, Matrix::Identity(2, 2)) - P) < 1e-15);
    CHECK(kalman::update_error_cov(s(1), s(0.5), s(1), s(1))(0, 0) == doctest::Approx(0.5));
    for (double eps : {1e-3, 0.1, 2.0}) {
        const Matrix I = Matrix::Identity(3, 3);
        const auto g = kalman::kalman_gain(I, I, eps * I);
        const Matrix out = kalman::update_error_cov(I, g.gain, I, eps * I);
        CHECK(max_abs(out - (eps * eps / (1.0 + eps * eps)) * I) < 1e-12);
    }
}

TEST_CASE("innovation_cov") {
    CHECK(max_abs(kalman::innovation_cov(testing::Gen(4).spd(3), Matrix::Zero(2, 3), Matrix::Identity(2, 2)) -
                  Matrix::Identity(2, 2)) == 0.0);
    CHECK(kalman::innovation_cov(s(1), s(1), s(1))(0, 0) == doctest::Approx(2.0));
}

TEST_CASE("example schedule matches an extended-precision recursion") {
    const SteeringProblem p = testing::double_integrator();
    const FilterSchedule sch = kalman::run_schedule(p);
    LMatrix P = p.prior_error_cov.cast<long double>();
    for (int k = 0; k <= p.horizon; ++k) {
        const auto ku = static_cast<std::size_t>(k);
        const LMatrix C = p.C[ku].cast<long double>();
        const LMatrix D = p.D[ku].cast<long double>();
        const LMatrix Sy = C * P * C.transpose() + D * D.transpose();
        const LMatrix L = P * C.transpose() * Sy.inverse();
        const LMatrix IKC = LMatrix::Identity(4, 4) - L * C;
        const LMatrix Pk = IKC * P * IKC.transpose() + L * D * D.transpose() * L.transpose();
        CHECK(max_abs(sch.prior_error_cov[ku] - P.cast<double>()) < 1e-13);
        CHECK(max_abs(sch.innovation_cov[ku] - Sy.cast<double>()) < 1e-13);
        CHECK(max_abs(sch.gains[ku] - L.cast<double>()) < 1e-9);
        CHECK(max_abs(sch.posterior_error_cov[ku] - Pk.cast<double>()) < 1e-13);
        if (k < p.horizon) {
            const LMatrix A = p.A[ku].cast<long double>();
            const LMatrix G = p.G[ku].cast<long double>();
            P = A * Pk * A.transpose() + G * G.transpose();
        }
    }
    CHECK(min_eig(p.target_cov_bound - sch.posterior_error_cov.back()) > 0.0);
}

TEST_CASE("noiseless trace decreases monotonically") {
    testing::Gen g(5);
    SteeringProblem p = testing::random_problem(g, 3, 1, 3, 8);
    for (auto& G : p.G) {
        G.setZero();
    }
    for (auto& C : p.C) {
        C = Matrix::Identity(3, 3);
    }
    for (auto& D : p.D) {
        D = 0.05 * Matrix::Identity(3, 3);
    }
    for (auto& A : p.A) {
        A = Matrix::Identity(3, 3);
    }
    p.prior_error_cov = g.spd(3);
    const FilterSchedule sch = kalman::run_schedule(p);
    for (std::size_t k = 1; k < sch.posterior_error_cov.size(); ++k) {
        CHECK(sch.posterior_error_cov[k].trace() < sch.posterior_error_cov[k - 1].trace());
    }
}

TEST_CASE("no uncertainty ever gives zero schedule") {
    testing::Gen g(6);
    SteeringProblem p = testing::random_problem(g, 2, 1, 2, 5);
    for (auto& G : p.G) {
        G.setZero();
    }
    p.prior_error_cov.setZero();
    const FilterSchedule sch = kalman::run_schedule(p);
    for (std::size_t k = 0; k < sch.gains.size(); ++k) {
        CHECK(max_abs(sch.gains[k]) == 0.0);
        CHECK(max_abs(sch.posterior_error_cov[k]) == 0.0);
    }
}

TEST_CASE("filter property suite on 100 random problems") {
    testing::Gen g(20190610);
    for (int trial = 0; trial < 100; ++trial) {
        const Eigen::Index nx = g.integer(1, 4);
        const Eigen::Index nu = g.integer(1, 3);
        const Eigen::Index ny = g.integer(1, 4);
        const int N = g.integer(1, 10);
        const SteeringProblem p = testing::random_problem(g, nx, nu, ny, N);
        const FilterSchedule sch = kalman::run_schedule(p);
        const auto oracle = testing::oracle_schedule(p);
        CAPTURE(trial);
        REQUIRE(sch.gains.size() == static_cast<std::size_t>(N + 1));
        CHECK(max_abs(sch.prior_error_cov[0] - p.prior_error_cov) == 0.0);
        for (int k = 0; k <= N; ++k) {
            const auto ku = static_cast<std::size_t>(k);
            const Matrix& post = sch.posterior_error_cov[ku];
            const Matrix& prior = sch.prior_error_cov[ku];
            const double scale = 1.0 + max_abs(prior);
            CHECK(max_abs(post - post.transpose()) <= 1e-12 * scale);
            CHECK(max_abs(prior - prior.transpose()) <= 1e-12 * scale);
            CHECK(min_eig(post) >= -1e-12 * scale);
            CHECK(min_eig(prior - post) >= -1e-9 * scale);
            CHECK(min_eig(sch.innovation_cov[ku]) > 0.0);
            // Joseph form with the optimal gain equals the short form.
            const Matrix shortform =
                (Matrix::Identity(nx, nx) - sch.gains[ku] * p.C[ku]) * prior;
            CHECK(max_abs(post - shortform) <= 1e-9 * scale);
            CHECK(max_abs(post - oracle.post[ku]) <= 1e-9 * scale);
            CHECK(max_abs(sch.gains[ku] - oracle.L[ku]) <= 1e-8 * (1.0 + max_abs(oracle.L[ku])));
        }

        // Fields the filter must ignore.
        SteeringProblem q = p;
        for (auto& B : q.B) {
            B = g.matrix(nx, nu, 5.0);
        }
        for (auto& Q : q.Q) {
            Q = g.psd(nx, nx);
        }
        for (auto& R : q.R) {
            R = g.spd(nu);
        }
        q.prior_mean = g.vector(nx, 10.0);
        q.target_mean = g.vector(nx, 10.0);
        q.constraints.push_back({g.vector(nx), 3.0, 0.001});
        const FilterSchedule t = kalman::run_schedule(q);
        for (std::size_t k = 0; k < sch.gains.size(); ++k) {
            CHECK((sch.gains[k].array() == t.gains[k].array()).all());
            CHECK((sch.posterior_error_cov[k].array() == t.posterior_error_cov[k].array()).all());
            CHECK((sch.prior_error_cov[k].array() == t.prior_error_cov[k].array()).all());
            CHECK((sch.innovation_cov[k].array() == t.innovation_cov[k].array()).all());
        }
    }
}
