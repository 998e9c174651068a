#pragma once

#include <vector>

#include "covsteer/kalman.hpp"
#include "covsteer/lift.hpp"
#include "covsteer/model.hpp"
#include "covsteer/transcribe.hpp"

namespace covsteer {

/// Solved control law u_k = Σ_{i≤k} K_{k,i}(x̂_i − x̄_i) + m_k and its
/// analytic closed-loop distribution.
struct Policy {
    int horizon = 0;
    int bandwidth = DecisionLayout::kFull;
    Matrix F;  ///< as solved
    Vector M;
    Matrix K;  ///< F(I + BF)^{-1}, block lower-triangular
    std::vector<Vector> feedforward;   ///< m_k, k < N
    std::vector<Vector> mean;          ///< x̄_k, k ≤ N
    Matrix filtered_joint;             ///< P̂ = (I + BF) S (I + BF)'
    std::vector<Matrix> filtered_cov;  ///< P̂_k
    std::vector<Matrix> total_cov;     ///< P_k = P̂_k + P̃_k
    double objective = 0.0;

    [[nodiscard]] Eigen::Index nx() const { return mean.empty() ? 0 : mean.front().size(); }
    [[nodiscard]] Eigen::Index nu() const { return feedforward.empty() ? 0 : feedforward.front().size(); }
    /// K_{k,i}.
    [[nodiscard]] Matrix gain(int k, int i) const;
};

struct ChanceSlack {
    int step = 0;
    int constraint = 0;  ///< 0-based
    double value = 0.0;  ///< Φ^{-1}(1 − p_j)‖P_k^{1/2} α_j‖ + α_j'x̄_k − β_j
    double slack = 0.0;  ///< −value; nonnegative when satisfied
};

struct ConstraintAudit {
    std::vector<ChanceSlack> chance;
    double terminal_eigen_slack = 0.0;  ///< λ_min(P_f − P_N)
    Vector terminal_mean_residual;      ///< x̄_N − x̄_f
    [[nodiscard]] double min_chance_slack() const;
    [[nodiscard]] double terminal_mean_error() const { return terminal_mean_residual.cwiseAbs().maxCoeff(); }
};

namespace policy {

/// K = F(I + BF)^{-1} by a unit lower-triangular solve.
Matrix gains_from_feedback(const Matrix& F, const Matrix& B);

/// F = K(I − BK)^{-1}.
Matrix feedback_from_gains(const Matrix& K, const Matrix& B);

/// Splits M into per-step feedforward terms m_k.
std::vector<Vector> split_feedforward(const Vector& M, Eigen::Index nu);

Policy propagate_distribution(const Matrix& F, const Vector& M, const LiftedOperators& ops,
                              const FilterSchedule& schedule, const Vector& prior_mean);

ConstraintAudit audit_constraints(const Policy& policy, const SteeringProblem& problem);

}  // namespace policy
}  // namespace covsteer
