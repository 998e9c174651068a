#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>

#include <Eigen/Eigenvalues>

#include "covsteer/kalman.hpp"
#include "covsteer/lift.hpp"
#include "covsteer/policy.hpp"
#include "support.hpp"

using namespace covsteer;
using testing::max_abs;

namespace {

Matrix s(double v) { return Matrix::Constant(1, 1, v); }

struct Built {
    SteeringProblem problem;
    FilterSchedule schedule;
    LiftedOperators ops;
};

Built build(const SteeringProblem& p) {
    Built b{p, kalman::run_schedule(p), {}};
    b.ops = lift::build(p, b.schedule);
    return b;
}

}  // namespace

TEST_CASE("zero feedback recovers zero gains") {
    testing::Gen g(41);
    const Built b = build(testing::random_problem(g, 3, 2, 2, 4));
    const Matrix F = Matrix::Zero(b.ops.input_dim(), b.ops.state_dim());
    CHECK(max_abs(policy::gains_from_feedback(F, b.ops.B)) == 0.0);
}

TEST_CASE("N = 2 scalar chain: gains by explicit triangular inversion") {
    const double a = 0.9;
    const double bb = 0.4;
    SteeringProblem p = make_time_invariant(2, s(a), s(bb), s(0.2), s(1), s(0.3), s(1), s(1));
    p.prior_mean = Vector::Zero(1);
    p.prior_estimate_cov = s(0.1);
    p.prior_error_cov = s(0.1);
    const Built b = build(p);
    Matrix F(2, 3);
    F << 0.7, 0, 0, -1.1, 0.3, 0;
    // T = I + BF = [[1,0,0],[x,1,0],[y,z,1]], T^{-1} = [[1,0,0],[−x,1,0],[xz−y,−z,1]].
    const Matrix T = Matrix::Identity(3, 3) + b.ops.B * F;
    const double x = T(1, 0);
    const double y = T(2, 0);
    const double z = T(2, 1);
    CHECK(T(0, 1) == 0.0);
    CHECK(T(1, 2) == 0.0);
    Matrix Tinv(3, 3);
    Tinv << 1, 0, 0, -x, 1, 0, x * z - y, -z, 1;
    const Matrix expected = F * Tinv;
    CHECK(max_abs(policy::gains_from_feedback(F, b.ops.B) - expected) < 1e-15);
    CHECK(expected(0, 1) == 0.0);
    CHECK(expected(1, 2) == 0.0);
}

TEST_CASE("change of variables round trip on 100 random block lower-triangular K") {
    testing::Gen g(20190610);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const Eigen::Index nx = g.integer(1, 4);
        const Eigen::Index nu = g.integer(1, 3);
        const int N = g.integer(1, 10);
        const Built b = build(testing::random_problem(g, nx, nu, 2, N));
        const Matrix K = testing::random_block_lower(g, N, nu, nx, 0.5);
        const Matrix F = policy::feedback_from_gains(K, b.ops.B);
        const Matrix K2 = policy::gains_from_feedback(F, b.ops.B);
        const double scale = std::max(1.0, max_abs(K));
        worst = std::max(worst, max_abs(K2 - K) / scale);
        CHECK(max_abs(K2 - K) <= 1e-9 * scale);

        // I + BF = (I − BK)^{-1}.
        Matrix IpBF = b.ops.B * F;
        IpBF.diagonal().array() += 1.0;
        Matrix ImBK = -b.ops.B * K;
        ImBK.diagonal().array() += 1.0;
        CHECK(max_abs(IpBF * ImBK - Matrix::Identity(IpBF.rows(), IpBF.cols())) <= 1e-9 * (1.0 + max_abs(IpBF)));

        // Both maps preserve the block lower-triangular pattern.
        for (int k = 0; k < N; ++k) {
            CHECK(max_abs(F.block(k * nu, (k + 1) * nx, nu, (N - k) * nx)) == 0.0);
            CHECK(max_abs(K2.block(k * nu, (k + 1) * nx, nu, (N - k) * nx)) == 0.0);
        }
    }
    MESSAGE("worst relative round-trip error " << worst);
}

TEST_CASE("zero policy: drift mean and open-loop filtered covariance") {
    testing::Gen g(42);
    const Built b = build(testing::random_problem(g, 3, 2, 2, 5));
    const Matrix F = Matrix::Zero(b.ops.input_dim(), b.ops.state_dim());
    const Policy pol = policy::propagate_distribution(F, Vector::Zero(b.ops.input_dim()), b.ops, b.schedule,
                                                      b.problem.prior_mean);
    Vector drift = b.problem.prior_mean;
    for (int k = 0; k <= 5; ++k) {
        const auto ku = static_cast<std::size_t>(k);
        CHECK((pol.mean[ku] - drift).cwiseAbs().maxCoeff() < 1e-12);
        CHECK(max_abs(pol.filtered_cov[ku] - b.ops.S.block(3 * k, 3 * k, 3, 3)) < 1e-12);
        if (k < 5) {
            drift = b.problem.A[ku] * drift;
        }
    }
}

TEST_CASE("mean and covariance match stepwise propagation under the gains") {
    testing::Gen g(43);
    for (int trial = 0; trial < 20; ++trial) {
        const Eigen::Index nx = g.integer(1, 4);
        const Eigen::Index nu = g.integer(1, 3);
        const Eigen::Index ny = g.integer(1, 3);
        const int N = g.integer(1, 8);
        const Built b = build(testing::random_problem(g, nx, nu, ny, N));
        const Matrix K = testing::random_block_lower(g, N, nu, nx, 0.4);
        const Vector M = g.vector(N * nu);
        const Matrix F = policy::feedback_from_gains(K, b.ops.B);
        const Policy pol = policy::propagate_distribution(F, M, b.ops, b.schedule, b.problem.prior_mean);
        CAPTURE(trial);
        CHECK(max_abs(pol.K - K) <= 1e-9 * std::max(1.0, max_abs(K)));

        // Coefficients of each x̂_k − x̄_k on ξ = (x̂_{0⁻} − x̄_0, ỹ_0, …, ỹ_N).
        const Eigen::Index dim = nx + (N + 1) * ny;
        Matrix cov = Matrix::Zero(dim, dim);
        cov.topLeftCorner(nx, nx) = b.problem.prior_estimate_cov;
        for (int k = 0; k <= N; ++k) {
            cov.block(nx + k * ny, nx + k * ny, ny, ny) = b.schedule.innovation_cov[static_cast<std::size_t>(k)];
        }
        std::vector<Matrix> dev;
        Matrix d0 = Matrix::Zero(nx, dim);
        d0.leftCols(nx) = Matrix::Identity(nx, nx);
        d0.middleCols(nx, ny) = b.schedule.gains[0];
        dev.push_back(d0);
        Vector mean = b.problem.prior_mean;
        for (int k = 0; k <= N; ++k) {
            const auto ku = static_cast<std::size_t>(k);
            CHECK((pol.mean[ku] - mean).cwiseAbs().maxCoeff() <= 1e-10 * (1.0 + mean.cwiseAbs().maxCoeff()));
            const Matrix expected = dev[ku] * cov * dev[ku].transpose();
            CHECK(max_abs(pol.filtered_cov[ku] - expected) <= 1e-8 * (1.0 + max_abs(expected)));
            CHECK(max_abs(pol.total_cov[ku] - pol.filtered_cov[ku] - b.schedule.posterior_error_cov[ku]) <= 1e-12 *
                  (1.0 + max_abs(pol.total_cov[ku])));
            CHECK(Eigen::SelfAdjointEigenSolver<Matrix>(pol.filtered_cov[ku]).eigenvalues()(0) >=
                  -1e-10 * (1.0 + max_abs(expected)));
            if (k == N) {
                break;
            }
            Matrix u = Matrix::Zero(nu, dim);
            for (int i = 0; i <= k; ++i) {
                u += K.block(k * nu, i * nx, nu, nx) * dev[static_cast<std::size_t>(i)];
            }
            Matrix next = b.problem.A[ku] * dev[ku] + b.problem.B[ku] * u;
            next.middleCols(nx + (k + 1) * ny, ny) += b.schedule.gains[ku + 1];
            dev.push_back(next);
            mean = b.problem.A[ku] * mean + b.problem.B[ku] * M.segment(k * nu, nu);
        }
        CHECK(pol.feedforward.size() == static_cast<std::size_t>(N));
    }
}

TEST_CASE("audit reports an injected violation at the right step and constraint") {
    testing::Gen g(44);
    SteeringProblem p = testing::random_problem(g, 2, 1, 2, 4);
    p.constraints.push_back({Vector::Ones(2), 100.0, 0.004});
    p.constraints.push_back({Vector::Unit(2, 0), 100.0, 0.004});
    const Built b = build(p);
    const Matrix F = Matrix::Zero(b.ops.input_dim(), b.ops.state_dim());
    const Vector M = g.vector(b.ops.input_dim());
    const Policy pol = policy::propagate_distribution(F, M, b.ops, b.schedule, p.prior_mean);
    const ConstraintAudit loose = policy::audit_constraints(pol, p);
    CHECK(loose.chance.size() == 2 * 5);
    CHECK(loose.min_chance_slack() > 0.0);

    // Tighten β_2 between the hardest and second-hardest step: exactly one violation.
    const double q996 = 2.6520698079;  // Φ^{-1}(0.996)
    std::vector<double> needed;
    for (int k = 0; k <= 4; ++k) {
        const auto& P = pol.total_cov[static_cast<std::size_t>(k)];
        needed.push_back(pol.mean[static_cast<std::size_t>(k)](0) + q996 * std::sqrt(P(0, 0)));
    }
    std::vector<double> sorted = needed;
    std::sort(sorted.begin(), sorted.end());
    REQUIRE(sorted[4] > sorted[3]);
    const int worst = static_cast<int>(std::max_element(needed.begin(), needed.end()) - needed.begin());
    SteeringProblem q = p;
    q.constraints[1].beta = 0.5 * (sorted[4] + sorted[3]);
    const ConstraintAudit audit = policy::audit_constraints(pol, q);
    for (const auto& c : audit.chance) {
        const bool target = c.step == worst && c.constraint == 1;
        CHECK((c.slack < 0.0) == target);
        CHECK(c.value == doctest::Approx(-c.slack));
    }
}

TEST_CASE("unconstrained problem audits only the terminal conditions") {
    testing::Gen g(45);
    const Built b = build(testing::random_problem(g, 2, 1, 2, 3));
    const Matrix F = Matrix::Zero(b.ops.input_dim(), b.ops.state_dim());
    const Policy pol =
        policy::propagate_distribution(F, Vector::Zero(b.ops.input_dim()), b.ops, b.schedule, b.problem.prior_mean);
    const ConstraintAudit audit = policy::audit_constraints(pol, b.problem);
    CHECK(audit.chance.empty());
    CHECK(audit.terminal_mean_residual.size() == 2);
    CHECK(audit.terminal_eigen_slack > 0.0);
}
