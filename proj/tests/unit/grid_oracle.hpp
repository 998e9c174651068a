#pragma once

#include <array>
#include <cmath>
#include <limits>

#include "covsteer/model.hpp"
#include "support.hpp"

namespace testing {

/// Φ^{-1} by bisection on erfc; slow but shares nothing with the library.
inline double bisect_quantile(double p) {
    double lo = -40.0;
    double hi = 40.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (0.5 * std::erfc(-mid / std::sqrt(2.0)) < p ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

/// Scalar, N = 2 instance evaluated by direct stepwise moment propagation.
/// Decision: θ = (F00, F10, F11, m0); m1 follows from the terminal mean.
struct ScalarTwoStep {
    SteeringProblem p;
    OracleSchedule sch;
    std::vector<double> quantiles;

    explicit ScalarTwoStep(SteeringProblem problem) : p(std::move(problem)), sch(oracle_schedule(p)) {
        for (const auto& c : p.constraints) {
            quantiles.push_back(bisect_quantile(1.0 - c.risk));
        }
    }

    double at(const std::vector<Matrix>& v, int k) const { return v[static_cast<std::size_t>(k)](0, 0); }

    double m1(double m0) const {
        const double a0 = at(p.A, 0), a1 = at(p.A, 1), b0 = at(p.B, 0), b1 = at(p.B, 1);
        return (p.target_mean(0) - a1 * a0 * p.prior_mean(0) - a1 * b0 * m0) / b1;
    }

    /// Objective, or +inf when a constraint is violated by more than `tol`.
    double evaluate(const std::array<double, 4>& t, double tol = 0.0) const {
        const double a0 = at(p.A, 0), a1 = at(p.A, 1), b0 = at(p.B, 0), b1 = at(p.B, 1);
        const double L0 = sch.L[0](0, 0), L1 = sch.L[1](0, 0), L2 = sch.L[2](0, 0);
        // Coefficients on ξ = (x̂_{0⁻} − x̄_0, ỹ_0, ỹ_1, ỹ_2).
        using V = std::array<double, 4>;
        const V var = {p.prior_estimate_cov(0, 0), sch.innov[0](0, 0), sch.innov[1](0, 0), sch.innov[2](0, 0)};
        auto variance = [&](const V& v) {
            double s = 0.0;
            for (int i = 0; i < 4; ++i) {
                s += v[i] * v[i] * var[i];
            }
            return s;
        };
        auto axpy = [](double a, const V& x, const V& y) {
            V out{};
            for (int i = 0; i < 4; ++i) {
                out[i] = a * x[i] + y[i];
            }
            return out;
        };
        const V z0 = {1.0, L0, 0.0, 0.0};
        const V z1 = axpy(a0, z0, {0.0, 0.0, L1, 0.0});
        const V u0 = axpy(t[0], z0, {});
        const V u1 = axpy(t[1], z0, axpy(t[2], z1, {}));
        const V d0 = z0;
        const V d1 = axpy(a0, d0, axpy(b0, u0, {0.0, 0.0, L1, 0.0}));
        const V d2 = axpy(a1, d1, axpy(b1, u1, {0.0, 0.0, 0.0, L2}));

        const double mu0 = p.prior_mean(0);
        const double mu1 = a0 * mu0 + b0 * t[3];
        const double mu2 = p.target_mean(0);
        const double mm1 = m1(t[3]);

        const std::array<double, 3> mean = {mu0, mu1, mu2};
        const std::array<double, 3> hat = {variance(d0), variance(d1), variance(d2)};
        for (std::size_t j = 0; j < p.constraints.size(); ++j) {
            const auto& c = p.constraints[j];
            const double alpha = c.alpha(0);
            for (int k = 0; k < 3; ++k) {
                const double total = hat[static_cast<std::size_t>(k)] + at(sch.post, k);
                const double value =
                    quantiles[j] * std::abs(alpha) * std::sqrt(total) + alpha * mean[static_cast<std::size_t>(k)] - c.beta;
                if (value > tol) {
                    return std::numeric_limits<double>::infinity();
                }
            }
        }
        if (hat[2] + at(sch.post, 2) > p.target_cov_bound(0, 0) + tol) {
            return std::numeric_limits<double>::infinity();
        }
        const double q0 = at(p.Q, 0), q1 = at(p.Q, 1), r0 = at(p.R, 0), r1 = at(p.R, 1);
        return q0 * (mu0 * mu0 + hat[0]) + q1 * (mu1 * mu1 + hat[1]) + r0 * (t[3] * t[3] + variance(u0)) +
               r1 * (mm1 * mm1 + variance(u1));
    }

    struct Result {
        std::array<double, 4> theta{};
        double objective = std::numeric_limits<double>::infinity();
        double final_spacing = 0.0;
    };

    /// 9^4 grid around the incumbent, halved until the spacing reaches `spacing`.
    Result grid_search(double half_width, double spacing) const {
        Result best;
        best.theta = {0.0, 0.0, 0.0, 0.0};
        best.objective = evaluate(best.theta);
        double w = half_width;
        constexpr int pts = 9;
        while (true) {
            const double h = 2.0 * w / (pts - 1);
            const auto centre = best.theta;
            std::array<double, 4> t{};
            for (int i0 = 0; i0 < pts; ++i0) {
                t[0] = centre[0] - w + i0 * h;
                for (int i1 = 0; i1 < pts; ++i1) {
                    t[1] = centre[1] - w + i1 * h;
                    for (int i2 = 0; i2 < pts; ++i2) {
                        t[2] = centre[2] - w + i2 * h;
                        for (int i3 = 0; i3 < pts; ++i3) {
                            t[3] = centre[3] - w + i3 * h;
                            const double v = evaluate(t);
                            if (v < best.objective) {
                                best.objective = v;
                                best.theta = t;
                            }
                        }
                    }
                }
            }
            best.final_spacing = h;
            if (h <= spacing) {
                break;
            }
            // Keep the grid wide while the incumbent is still moving.
            if (best.theta == centre) {
                w *= 0.5;
            }
        }
        return best;
    }
};

/// 1-state, N = 2 instance tuned so the chance constraint binds and the
/// terminal bound is within 1e-4 of binding at the optimum.
inline SteeringProblem scalar_two_step_problem() {
    auto s = [](double v) { return Matrix::Constant(1, 1, v); };
    SteeringProblem p = covsteer::make_time_invariant(2, s(1.2), s(1.0), s(0.3), s(1.0), s(0.3), s(1.0), s(1.0));
    p.prior_mean = Vector::Constant(1, 0.0);
    p.prior_estimate_cov = s(0.05);
    p.prior_error_cov = s(0.02);
    p.target_mean = Vector::Constant(1, 1.0);
    p.target_cov_bound = s(0.1812);
    covsteer::HalfPlaneConstraint c;
    c.alpha = Vector::Constant(1, 1.0);
    c.beta = 1.7;
    c.risk = 0.05;
    p.constraints.push_back(c);
    p.total_risk = 0.05;
    return p;
}

}  // namespace testing
