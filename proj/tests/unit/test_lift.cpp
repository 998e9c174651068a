#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <Eigen/Eigenvalues>

#include "covsteer/kalman.hpp"
#include "covsteer/lift.hpp"
#include "support.hpp"

using namespace covsteer;
using testing::max_abs;

namespace {

Matrix s(double v) { return Matrix::Constant(1, 1, v); }

SteeringProblem scalar_chain(int N, double a, double b) {
    SteeringProblem p = make_time_invariant(N, s(a), s(b), s(0.3), s(1.0), s(0.5), s(1.0), s(1.0));
    p.prior_mean = Vector::Constant(1, 0.2);
    p.prior_estimate_cov = s(0.4);
    p.prior_error_cov = s(0.7);
    p.target_mean = Vector::Zero(1);
    p.target_cov_bound = s(10.0);
    p.total_risk = 0.01;
    return p;
}

}  // namespace

TEST_CASE("N = 2 scalar chain: A, B and L by hand") {
    const double a = 1.3;
    const double b = 0.7;
    const SteeringProblem p = scalar_chain(2, a, b);
    const FilterSchedule sch = kalman::run_schedule(p);
    const LiftedOperators ops = lift::build(p, sch);

    Matrix A(3, 1);
    A << 1, a, a * a;
    Matrix B(3, 2);
    B << 0, 0, b, 0, a * b, b;
    const double l0 = sch.gains[0](0, 0);
    const double l1 = sch.gains[1](0, 0);
    const double l2 = sch.gains[2](0, 0);
    Matrix L(3, 3);
    L << l0, 0, 0, a * l0, l1, 0, a * a * l0, a * l1, l2;
    CHECK(max_abs(ops.A - A) < 1e-15);
    CHECK(max_abs(ops.B - B) < 1e-15);
    CHECK(max_abs(ops.L - L) < 1e-15);
}

TEST_CASE("N = 1 identity chain stacks identities") {
    testing::Gen g(7);
    SteeringProblem p = testing::random_problem(g, 3, 2, 2, 1);
    p.A[0] = Matrix::Identity(3, 3);
    const LiftedOperators ops = lift::build(p, kalman::run_schedule(p));
    Matrix expected(6, 3);
    expected << Matrix::Identity(3, 3), Matrix::Identity(3, 3);
    CHECK(max_abs(ops.A - expected) == 0.0);
}

TEST_CASE("noise_cov_factor") {
    const Matrix I = Matrix::Identity(3, 3);
    const Matrix F = lift::noise_cov_factor(I);
    CHECK(max_abs(F.transpose() * F - I) < 1e-14);
    CHECK(max_abs(F * F.transpose() - I) < 1e-14);

    Matrix D = Matrix::Zero(2, 2);
    D.diagonal() << 4, 9;
    const Matrix Fd = lift::noise_cov_factor(D);
    CHECK(max_abs(Fd.transpose() * Fd - D) < 1e-14);
    CHECK(Fd.cwiseAbs().diagonal().sum() == doctest::Approx(5.0));

    CHECK(max_abs(lift::noise_cov_factor(Matrix::Zero(3, 3))) == 0.0);

    testing::Gen g(8);
    const Matrix low = g.psd(6, 2);
    const Matrix Fl = lift::noise_cov_factor(low);
    CHECK(max_abs(Fl.transpose() * Fl - low) <= 1e-12 * (1.0 + max_abs(low)));
}

TEST_CASE("structural invariants of the lifted operators") {
    testing::Gen g(9);
    for (int trial = 0; trial < 20; ++trial) {
        const Eigen::Index nx = g.integer(1, 4);
        const Eigen::Index nu = g.integer(1, 3);
        const Eigen::Index ny = g.integer(1, 3);
        const int N = g.integer(1, 8);
        const SteeringProblem p = testing::random_problem(g, nx, nu, ny, N);
        const FilterSchedule sch = kalman::run_schedule(p);
        const LiftedOperators ops = lift::build(p, sch);
        CAPTURE(trial);
        for (int i = 0; i <= N; ++i) {
            for (int j = 0; j < N; ++j) {
                if (i <= j) {
                    CHECK(max_abs(ops.B.block(i * nx, j * nu, nx, nu)) == 0.0);
                }
            }
            for (int j = i + 1; j <= N; ++j) {
                CHECK(max_abs(ops.L.block(i * nx, j * ny, nx, ny)) == 0.0);
            }
            CHECK(max_abs(ops.L.block(i * nx, i * ny, nx, ny) - sch.gains[static_cast<std::size_t>(i)]) == 0.0);
        }
        CHECK(max_abs(ops.Q.bottomRightCorner(nx, nx)) == 0.0);
        CHECK(max_abs(ops.Q.topLeftCorner(nx, nx) - p.Q[0]) == 0.0);
        CHECK(Eigen::SelfAdjointEigenSolver<Matrix>(ops.R).eigenvalues()(0) > 0.0);

        const Matrix S_expected = ops.A * p.prior_estimate_cov * ops.A.transpose() +
                                  ops.L * ops.innovation_cov * ops.L.transpose();
        CHECK(max_abs(ops.S - S_expected) <= 1e-10 * (1.0 + max_abs(S_expected)));
        CHECK(max_abs(ops.S - ops.S.transpose()) == 0.0);
        CHECK(Eigen::SelfAdjointEigenSolver<Matrix>(ops.S).eigenvalues()(0) >= -1e-10 * (1.0 + max_abs(ops.S)));
        CHECK(max_abs(ops.S_half.transpose() * ops.S_half - ops.S) <= 1e-8 * (1.0 + max_abs(ops.S)));

        // I − BK is unit lower triangular for any block lower-triangular K.
        const Matrix K = testing::random_block_lower(g, N, nu, nx, 1.0);
        Matrix T = -ops.B * K;
        T.diagonal().array() += 1.0;
        const Vector e = g.vector(T.rows());
        const Vector z = T.triangularView<Eigen::UnitLower>().solve(e);
        CHECK((T * z - e).cwiseAbs().maxCoeff() <= 1e-9 * (1.0 + e.cwiseAbs().maxCoeff() * max_abs(T)));
        CHECK(max_abs(T.triangularView<Eigen::StrictlyUpper>().toDenseMatrix()) == 0.0);
    }
}

TEST_CASE("lifting equivalence against the stepwise filtered recursion on 100 random problems") {
    testing::Gen g(1234567);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const Eigen::Index nx = g.integer(1, 4);
        const Eigen::Index nu = g.integer(1, 3);
        const Eigen::Index ny = g.integer(1, 4);
        const int N = g.integer(1, 10);
        const SteeringProblem p = testing::random_problem(g, nx, nu, ny, N);
        const FilterSchedule sch = kalman::run_schedule(p);
        const LiftedOperators ops = lift::build(p, sch);

        const Vector x0 = g.vector(nx);
        const Vector U = g.vector(N * nu);
        const Vector Y = g.vector((N + 1) * ny);
        const Vector stacked = ops.A * x0 + ops.B * U + ops.L * Y;

        Vector xhat = x0 + sch.gains[0] * Y.segment(0, ny);
        for (int k = 0; k <= N; ++k) {
            const double diff = (ops.select(stacked, k) - xhat).cwiseAbs().maxCoeff();
            worst = std::max(worst, diff);
            CHECK(diff <= 1e-10);
            if (k < N) {
                const auto ku = static_cast<std::size_t>(k);
                xhat = p.A[ku] * xhat + p.B[ku] * U.segment(k * nu, nu) +
                       sch.gains[ku + 1] * Y.segment((k + 1) * ny, ny);
            }
        }
    }
    MESSAGE("worst max-abs difference " << worst);
}
