#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "covsteer/conic.hpp"
#include "covsteer/kalman.hpp"
#include "covsteer/lift.hpp"
#include "covsteer/model.hpp"

namespace covsteer {

/// Flat index map for the decision pair (F, M).
///
/// F is (N n_u) × ((N+1) n_x).  Block (k, i) couples input step k to filtered
/// state i and exists for i ≤ k ≤ N−1; with a bandwidth b only blocks with
/// k − i ≤ b exist.  Entries of F come first (block by block, row-major inside
/// a block), then the N n_u entries of M.
class DecisionLayout {
public:
    static constexpr int kFull = -1;

    DecisionLayout() = default;
    DecisionLayout(int horizon, Eigen::Index nx, Eigen::Index nu, int bandwidth = kFull);

    [[nodiscard]] int horizon() const { return horizon_; }
    [[nodiscard]] Eigen::Index nx() const { return nx_; }
    [[nodiscard]] Eigen::Index nu() const { return nu_; }
    [[nodiscard]] int bandwidth() const { return bandwidth_; }
    [[nodiscard]] Eigen::Index f_rows() const { return horizon_ * nu_; }
    [[nodiscard]] Eigen::Index f_cols() const { return (horizon_ + 1) * nx_; }

    [[nodiscard]] bool has_block(int k, int i) const;
    /// First and last state block i present in input block row k.
    [[nodiscard]] std::pair<int, int> block_range(int k) const;

    [[nodiscard]] const std::vector<std::pair<int, int>>& blocks() const { return blocks_; }
    [[nodiscard]] Eigen::Index num_feedback() const { return num_feedback_; }
    [[nodiscard]] Eigen::Index num_feedforward() const { return horizon_ * nu_; }
    [[nodiscard]] Eigen::Index size() const { return num_feedback_ + num_feedforward(); }

    /// Flat index of F(row, col), or -1 when the entry is structurally zero.
    [[nodiscard]] Eigen::Index f_index(Eigen::Index row, Eigen::Index col) const;
    [[nodiscard]] Eigen::Index m_index(Eigen::Index row) const { return num_feedback_ + row; }

    [[nodiscard]] Vector pack(const Matrix& F, const Vector& M) const;
    /// Entries outside the layout are set to zero.
    void unpack(const Vector& x, Matrix& F, Vector& M) const;
    /// Copy of F with every structurally zero entry cleared.
    [[nodiscard]] Matrix mask(const Matrix& F) const;

private:
    int horizon_ = 0;
    Eigen::Index nx_ = 0;
    Eigen::Index nu_ = 0;
    int bandwidth_ = kFull;
    std::vector<std::pair<int, int>> blocks_;
    std::vector<Eigen::Index> block_start_;  // (k, i) -> offset, indexed k*(N+1)+i; -1 when absent
    Eigen::Index num_feedback_ = 0;
};

/// Affine rows E x = e over the flat decision vector.
struct LinearRows {
    Matrix E;
    Vector e;
};

/// J(x) = ‖W x + w‖² + constant over the flat decision vector.
///
/// `null_rows` picks out the components of F that act only on directions of
/// zero filtered-state variance.  They never change J or any constraint, so
/// the conic lowering adds ‖null_rows·x‖² to the epigraph: the optimal value
/// is unchanged and the minimizer becomes unique.
struct QuadraticObjective {
    SparseMatrix W;
    Vector w;
    double constant = 0.0;
    SparseMatrix null_rows;

    [[nodiscard]] double evaluate(const Vector& x) const { return (W * x + w).squaredNorm() + constant; }
};

/// One second-order cone ‖G_v x + h_v‖ ≤ g_t'x + h_t, stored in h − Gx form:
/// row 0 is the scalar side, the remaining rows the vector side.
struct ConeRows {
    ConeKind kind = ConeKind::SecondOrder;
    Eigen::Index order = 0;  ///< matrix order for Semidefinite
    SparseMatrix G;
    Vector h;
    std::string label;

    /// True when no row depends on the decision vector.
    [[nodiscard]] bool constant() const { return G.nonZeros() == 0; }
    /// Signed margin of h − Gx inside the cone (negative means outside).
    [[nodiscard]] double margin(const Vector& x) const;
};

enum class TerminalNorm {
    Spectral,   ///< exact E_N(I+BF)S(I+BF)'E_N' ⪯ P_f − P̃_N via a PSD cone
    Frobenius,  ///< conservative Frobenius-norm bound via one second-order cone
};

namespace transcribe {

/// Upper-trapezoidal R with R'R = S_half'S_half, rows below 1e-9 of the largest row norm dropped.
Matrix effective_factor(const Matrix& S_half);

LinearRows mean_constraint(const LiftedOperators& ops, const DecisionLayout& layout, const Vector& prior_mean,
                           const Vector& target_mean);

/// Orthonormal basis of the null space of S restricted to the columns of F
/// block row k (eigenvalues at most tolerance·λ_max count as zero).
Matrix feedback_null_basis(const LiftedOperators& ops, const DecisionLayout& layout, int k, double tolerance);

QuadraticObjective objective(const LiftedOperators& ops, const DecisionLayout& layout, const Vector& prior_mean,
                             double null_tolerance = 1e-10);

/// Throws std::invalid_argument when P_f − P̃_N is not positive definite.
ConeRows terminal_cov_constraint(const LiftedOperators& ops, const DecisionLayout& layout, const Matrix& target_cov_bound,
                                 const Matrix& terminal_error_cov, TerminalNorm norm = TerminalNorm::Spectral);

/// Chance constraint j at step k divided through by Φ^{-1}(1 − p_j).
/// Throws std::invalid_argument unless p_j ∈ (0, 0.5).
ConeRows chance_constraint_rows(const LiftedOperators& ops, const DecisionLayout& layout, const FilterSchedule& schedule,
                                const Vector& prior_mean, const HalfPlaneConstraint& constraint, int k);

/// Assembles min t + constant subject to ‖Wx + w‖² ≤ t (rotated cone), the
/// equalities (zero cone) and the cones.  The auxiliary t is the last variable.
ConicProgram lower_to_conic(const QuadraticObjective& objective, const LinearRows& equalities,
                            const std::vector<ConeRows>& cones, const DecisionLayout& layout);

}  // namespace transcribe

struct TranscribeOptions {
    int bandwidth = DecisionLayout::kFull;
    TerminalNorm terminal_norm = TerminalNorm::Spectral;
    /// Relative eigenvalue threshold used to strip F components that act on
    /// directions of zero filtered-state variance.
    double null_tolerance = 1e-10;
};

/// Everything needed to solve one instance and map the answer back.
struct Transcription {
    DecisionLayout layout;
    QuadraticObjective objective;
    LinearRows mean;
    std::vector<ConeRows> cones;
    ConicProgram program;
    /// Non-empty when the instance is infeasible before any solve
    /// (terminal precheck, step-0 chance rows, or unreachable mean).
    std::vector<std::string> infeasibilities;
};

Transcription transcribe_problem(const SteeringProblem& problem, const FilterSchedule& schedule,
                                 const LiftedOperators& ops, const TranscribeOptions& options = {});

struct SolveOutcome {
    SolveStatus status = SolveStatus::NumericalFailure;
    double objective = 0.0;
    std::optional<Matrix> F;  ///< present only when optimal
    std::optional<Vector> M;
    int iterations = 0;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    double gap = 0.0;
    double relative_gap = 0.0;
    std::string message;
};

/// Runs the backend and extracts (F, M).  Components of each F row that lie in
/// the null space of the corresponding block of S are projected out, giving
/// the minimum-norm member of the set of F with identical closed-loop law.
SolveOutcome solve(const Transcription& transcription, const LiftedOperators& ops, const ConicSolver& solver,
                   const TranscribeOptions& options = {});

}  // namespace covsteer
