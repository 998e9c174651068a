#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdlib>

#include "covsteer/kalman.hpp"
#include "covsteer/lift.hpp"
#include "covsteer/policy.hpp"
#include "covsteer/random.hpp"
#include "covsteer/simulate.hpp"
#include "grid_oracle.hpp"
#include "support.hpp"

using namespace covsteer;
using testing::max_abs;

namespace {

struct Setup {
    SteeringProblem problem;
    FilterSchedule schedule;
    LiftedOperators ops;
    Policy policy;
};

Setup setup(SteeringProblem p, std::uint64_t seed) {
    Setup s{std::move(p), {}, {}, {}};
    s.schedule = kalman::run_schedule(s.problem);
    s.ops = lift::build(s.problem, s.schedule);
    testing::Gen g(seed);
    const Matrix K = testing::random_block_lower(g, s.problem.horizon, s.problem.nu(), s.problem.nx(), 0.2);
    const Matrix F = policy::feedback_from_gains(K, s.ops.B);
    const Vector M = g.vector(s.ops.input_dim(), 0.5);
    s.policy = policy::propagate_distribution(F, M, s.ops, s.schedule, s.problem.prior_mean);
    return s;
}

SteeringProblem small(std::uint64_t seed) {
    testing::Gen g(seed);
    SteeringProblem p = testing::random_problem(g, 3, 2, 2, 6);
    p.constraints.push_back({Vector::Ones(3), 0.0, 0.005});
    return p;
}

bool same(const SimulationReport& a, const SimulationReport& b) {
    if (a.steps.size() != b.steps.size() || a.max_violation_rate != b.max_violation_rate) {
        return false;
    }
    for (std::size_t k = 0; k < a.steps.size(); ++k) {
        const auto& x = a.steps[k];
        const auto& y = b.steps[k];
        if (x.violations != y.violations || !(x.sample_mean.array() == y.sample_mean.array()).all() ||
            !(x.sample_cov.array() == y.sample_cov.array()).all() || x.cov_z != y.cov_z ||
            x.innovation_z != y.innovation_z) {
            return false;
        }
    }
    return (a.terminal_cov.array() == b.terminal_cov.array()).all();
}

}  // namespace

TEST_CASE("sample_gaussian: zero covariance returns the mean") {
    Rng rng(1);
    const Vector mean = Vector::LinSpaced(3, -1.0, 2.0);
    const Vector x = sample_gaussian(mean, Matrix::Zero(3, 3), rng);
    CHECK((x.array() == mean.array()).all());
}

TEST_CASE("sample_gaussian: unit variance over 10^6 draws") {
    Rng rng(2);
    const Vector mean = Vector::Zero(1);
    const Matrix factor = Matrix::Identity(1, 1);
    double sum = 0.0;
    double sq = 0.0;
    const int n = 1000000;
    for (int i = 0; i < n; ++i) {
        const double v = sample_gaussian(mean, factor, rng)(0);
        sum += v;
        sq += v * v;
    }
    const double m = sum / n;
    const double var = sq / n - m * m;
    CHECK(var >= 0.99);
    CHECK(var <= 1.01);
    CHECK(std::abs(m) < 3.0 / std::sqrt(double(n)));
}

TEST_CASE("sample_gaussian: correlated pair within 3 standard errors") {
    Rng rng(3);
    Matrix cov(2, 2);
    cov << 1.0, 0.5, 0.5, 1.0;
    const Matrix factor = cov.llt().matrixU();
    const int n = 200000;
    Matrix acc = Matrix::Zero(2, 2);
    Vector mean = Vector::Zero(2);
    for (int i = 0; i < n; ++i) {
        const Vector x = sample_gaussian(Vector::Zero(2), factor, rng);
        acc += x * x.transpose();
        mean += x;
    }
    mean /= n;
    const Matrix sample = acc / n - mean * mean.transpose();
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
            const double se = std::sqrt((cov(i, i) * cov(j, j) + cov(i, j) * cov(i, j)) / n);
            CHECK(std::abs(sample(i, j) - cov(i, j)) <= 3.0 * se);
        }
    }
}

TEST_CASE("derived seeds differ per stream and are stable") {
    CHECK(derive_seed(20190610, 0) != derive_seed(20190610, 1));
    CHECK(derive_seed(20190610, 7) == derive_seed(20190610, 7));
    Rng a(5);
    Rng b(5);
    for (int i = 0; i < 100; ++i) {
        CHECK(a.normal() == b.normal());
    }
}

TEST_CASE("Clopper-Pearson closed forms") {
    const double alpha = 0.01;
    for (std::size_t n : {1u, 10u, 1000u}) {
        const auto none = clopper_pearson(0, n, 0.99);
        CHECK(none.first == 0.0);
        CHECK(none.second == doctest::Approx(1.0 - std::pow(alpha / 2, 1.0 / double(n))).epsilon(1e-10));
        const auto all = clopper_pearson(n, n, 0.99);
        CHECK(all.second == 1.0);
        CHECK(all.first == doctest::Approx(std::pow(alpha / 2, 1.0 / double(n))).epsilon(1e-10));
    }
    const auto mid = clopper_pearson(50, 100, 0.95);
    CHECK(mid.first == doctest::Approx(0.3983).epsilon(1e-3));
    CHECK(mid.second == doctest::Approx(0.6017).epsilon(1e-3));
}

TEST_CASE("thread cap from the environment") {
    ::setenv("COVSTEER_THREADS", "2", 1);
    CHECK(resolve_threads(8) == 2);
    CHECK(resolve_threads(1) == 1);
    ::setenv("COVSTEER_THREADS", "garbage", 1);
    CHECK(resolve_threads(3) == 3);
    ::unsetenv("COVSTEER_THREADS");
    CHECK(resolve_threads(5) == 5);
}

TEST_CASE("noiseless limit: every run ends on the analytic mean") {
    testing::Gen g(51);
    SteeringProblem p = testing::random_problem(g, 3, 2, 3, 5);
    for (auto& G : p.G) {
        G.setZero();
    }
    for (auto& D : p.D) {
        D = 1e-9 * Matrix::Identity(3, 3);
    }
    p.prior_error_cov.setZero();
    p.prior_estimate_cov.setZero();
    const Setup s = setup(p, 52);
    SimulationOptions opt;
    opt.runs = 50;
    opt.trajectories = 50;
    const SimulationReport rep = run_closed_loop(s.problem, s.schedule, s.policy, opt);
    REQUIRE(rep.trajectories.size() == 50);
    for (const auto& traj : rep.trajectories) {
        CHECK((traj.back() - s.policy.mean.back()).cwiseAbs().maxCoeff() <= 1e-6);
    }
}

TEST_CASE("determinism across repeats, thread counts and batch boundaries") {
    const Setup s = setup(small(53), 54);
    SimulationOptions opt;
    opt.runs = 5000;
    opt.batch_size = 700;
    opt.threads = 1;
    const SimulationReport a = run_closed_loop(s.problem, s.schedule, s.policy, opt);
    const SimulationReport b = run_closed_loop(s.problem, s.schedule, s.policy, opt);
    opt.threads = 3;
    const SimulationReport c = run_closed_loop(s.problem, s.schedule, s.policy, opt);
    CHECK(same(a, b));
    CHECK(same(a, c));
    opt.seed += 1;
    CHECK_FALSE(same(a, run_closed_loop(s.problem, s.schedule, s.policy, opt)));
    CHECK(a.generator == std::string(Rng::kName));
}

TEST_CASE("single run gives degenerate rates") {
    const Setup s = setup(small(55), 56);
    SimulationOptions opt;
    opt.runs = 1;
    opt.trajectories = 1;
    const SimulationReport rep = run_closed_loop(s.problem, s.schedule, s.policy, opt);
    CHECK(rep.runs == 1);
    CHECK(rep.trajectories.size() == 1);
    for (const auto& st : rep.steps) {
        CHECK((st.rate == 0.0 || st.rate == 1.0));
    }
}

TEST_CASE("empirical moments and violation rates agree with the analytic distribution") {
    const Setup s = setup(small(57), 58);
    SimulationOptions opt;
    opt.runs = 40000;
    const SimulationReport rep = run_closed_loop(s.problem, s.schedule, s.policy, opt);
    const auto& c = s.problem.constraints[0];
    for (const auto& st : rep.steps) {
        const auto k = static_cast<std::size_t>(st.step);
        const double sd = std::sqrt(c.alpha.dot(s.policy.total_cov[k] * c.alpha));
        const double z = (c.beta - c.alpha.dot(s.policy.mean[k])) / sd;
        const double analytic = 0.5 * std::erfc(z / std::sqrt(2.0));
        CAPTURE(st.step);
        CHECK(st.rate_lower <= analytic);
        CHECK(analytic <= st.rate_upper);
        const double se = std::sqrt(analytic * (1 - analytic) / double(opt.runs));
        CHECK(std::abs(st.rate - analytic) <= 4.0 * se + 1e-12);
    }
    // Each z is a maximum over entries; with 12 entries per step and 7 steps a
    // bound of 4 keeps the family-wise false alarm rate below 1%.
    CHECK(rep.max_cov_z < 4.0);
    CHECK(rep.max_error_cov_z < 4.0);
    CHECK(rep.max_cross_z < 4.0);
    CHECK(rep.max_innovation_z < 4.0);
    CHECK((rep.terminal_mean - s.policy.mean.back()).cwiseAbs().maxCoeff() < 0.05);
}
