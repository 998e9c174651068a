#include "covsteer/policy.hpp"

#include <algorithm>
#include <limits>

#include "covsteer/normal_quantile.hpp"

namespace covsteer {

using Index = Eigen::Index;

Matrix Policy::gain(int k, int i) const {
    return K.block(k * nu(), i * nx(), nu(), nx());
}

double ConstraintAudit::min_chance_slack() const {
    double out = std::numeric_limits<double>::infinity();
    for (const auto& c : chance) {
        out = std::min(out, c.slack);
    }
    return out;
}

namespace policy {

Matrix gains_from_feedback(const Matrix& F, const Matrix& B) {
    if (B.cols() != F.rows() || B.rows() != F.cols()) {
        throw DimensionError("gains_from_feedback: F and B shapes disagree");
    }
    Matrix T = B * F;
    T.diagonal().array() += 1.0;
    // K T = F  ⟺  T' K' = F'.
    return T.transpose().triangularView<Eigen::UnitUpper>().solve(F.transpose()).transpose();
}

Matrix feedback_from_gains(const Matrix& K, const Matrix& B) {
    if (B.cols() != K.rows() || B.rows() != K.cols()) {
        throw DimensionError("feedback_from_gains: K and B shapes disagree");
    }
    Matrix T = -B * K;
    T.diagonal().array() += 1.0;
    return T.transpose().triangularView<Eigen::UnitUpper>().solve(K.transpose()).transpose();
}

std::vector<Vector> split_feedforward(const Vector& M, Index nu) {
    std::vector<Vector> out;
    for (Index k = 0; k * nu < M.size(); ++k) {
        out.emplace_back(M.segment(k * nu, nu));
    }
    return out;
}

Policy propagate_distribution(const Matrix& F, const Vector& M, const LiftedOperators& ops,
                              const FilterSchedule& schedule, const Vector& prior_mean) {
    linalg::require_shape(F, ops.input_dim(), ops.state_dim(), "propagate_distribution: F");
    if (M.size() != ops.input_dim()) {
        throw DimensionError("propagate_distribution: M has wrong length");
    }
    Policy p;
    p.horizon = ops.horizon;
    p.F = F;
    p.M = M;
    p.K = gains_from_feedback(F, ops.B);
    p.feedforward = split_feedforward(M, ops.nu);

    const Vector X = ops.A * prior_mean + ops.B * M;
    Matrix T = ops.B * F;
    T.diagonal().array() += 1.0;
    p.filtered_joint = linalg::symmetrized(T * ops.S * T.transpose());
    for (int k = 0; k <= ops.horizon; ++k) {
        p.mean.emplace_back(ops.select(X, k));
        const Index o = ops.state_offset(k);
        Matrix hat = p.filtered_joint.block(o, o, ops.nx, ops.nx);
        p.filtered_cov.push_back(hat);
        p.total_cov.push_back(linalg::symmetrized(hat + schedule.posterior_error_cov[static_cast<std::size_t>(k)]));
    }
    return p;
}

ConstraintAudit audit_constraints(const Policy& policy, const SteeringProblem& problem) {
    ConstraintAudit audit;
    for (std::size_t j = 0; j < problem.constraints.size(); ++j) {
        const auto& c = problem.constraints[j];
        const double q = normal_quantile(1.0 - c.risk);
        for (int k = 0; k <= policy.horizon; ++k) {
            const Matrix& P = policy.total_cov[static_cast<std::size_t>(k)];
            const double var = std::max(0.0, c.alpha.dot(P * c.alpha));
            ChanceSlack s;
            s.step = k;
            s.constraint = static_cast<int>(j);
            s.value = q * std::sqrt(var) + c.alpha.dot(policy.mean[static_cast<std::size_t>(k)]) - c.beta;
            s.slack = -s.value;
            audit.chance.push_back(s);
        }
    }
    audit.terminal_eigen_slack =
        linalg::min_eigenvalue(linalg::symmetrized(problem.target_cov_bound - policy.total_cov.back()));
    audit.terminal_mean_residual = policy.mean.back() - problem.target_mean;
    return audit;
}

}  // namespace policy
}  // namespace covsteer
