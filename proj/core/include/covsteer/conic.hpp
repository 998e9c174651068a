#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/SparseCore>

#include "covsteer/linalg.hpp"

namespace covsteer {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, Eigen::Index>;
using Triplet = Eigen::Triplet<double, Eigen::Index>;

enum class ConeKind {
    Zero,                ///< s = 0
    NonNegative,         ///< s ≥ 0 elementwise
    SecondOrder,         ///< s_0 ≥ ‖s_{1:}‖
    RotatedSecondOrder,  ///< 2 s_0 s_1 ≥ ‖s_{2:}‖², s_0, s_1 ≥ 0
    Semidefinite,        ///< svec(S) with S ⪰ 0
};

const char* cone_tag(ConeKind kind);

struct Cone {
    ConeKind kind = ConeKind::Zero;
    Eigen::Index dim = 0;    ///< number of rows of the block
    Eigen::Index order = 0;  ///< matrix order p for Semidefinite (dim = p(p+1)/2)

    static Cone zero(Eigen::Index n) { return {ConeKind::Zero, n, 0}; }
    static Cone nonnegative(Eigen::Index n) { return {ConeKind::NonNegative, n, 0}; }
    static Cone second_order(Eigen::Index n) { return {ConeKind::SecondOrder, n, 0}; }
    static Cone rotated(Eigen::Index n) { return {ConeKind::RotatedSecondOrder, n, 0}; }
    static Cone semidefinite(Eigen::Index p) { return {ConeKind::Semidefinite, p * (p + 1) / 2, p}; }
};

/// Entries of the svec(S) block are the lower triangle of S, column by column,
/// with off-diagonal entries scaled by √2 so that svec(X)'svec(Y) = tr(XY).
Eigen::Index svec_index(Eigen::Index order, Eigen::Index row, Eigen::Index col);
Vector svec(const Matrix& symmetric);
Matrix smat(const Vector& packed, Eigen::Index order);

enum class VariableKind { Feedback, Feedforward, Auxiliary };

/// Where a conic variable lives in the caller's decision structure.
struct VariableRef {
    VariableKind kind = VariableKind::Auxiliary;
    Eigen::Index row = 0;
    Eigen::Index col = 0;
};

/// minimize c'x + offset  subject to  h − G x ∈ K_1 × … × K_m.
struct ConicProgram {
    Vector c;
    double objective_offset = 0.0;
    SparseMatrix G;
    Vector h;
    std::vector<Cone> cones;
    std::vector<VariableRef> variables;

    [[nodiscard]] Eigen::Index num_variables() const { return c.size(); }
    [[nodiscard]] Eigen::Index num_rows() const { return h.size(); }
    [[nodiscard]] Eigen::Index cone_rows() const;

    /// Throws DimensionError when sizes disagree.
    void check() const;
};

/// Text dump: header, cone list, objective, h, and G in triplet form.
void write_conic_program(std::ostream& os, const ConicProgram& program);
ConicProgram read_conic_program(std::istream& is);

enum class SolveStatus { Optimal, Infeasible, Unbounded, NumericalFailure };

const char* status_name(SolveStatus status);

struct ConicSolution {
    SolveStatus status = SolveStatus::NumericalFailure;
    Vector x;  ///< primal variables
    Vector s;  ///< primal slacks, h − Gx
    Vector z;  ///< cone duals
    double primal_objective = 0.0;
    double dual_objective = 0.0;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    double gap = 0.0;
    double relative_gap = 0.0;
    int iterations = 0;
    std::string message;
};

/// Single-call conic backend.  Implementations must be reentrant: concurrent
/// calls on distinct programs share no mutable state.
class ConicSolver {
public:
    virtual ~ConicSolver() = default;
    [[nodiscard]] virtual ConicSolution solve(const ConicProgram& program) const = 0;
    [[nodiscard]] virtual std::string name() const = 0;
    [[nodiscard]] virtual bool supports(ConeKind kind) const = 0;
};

}  // namespace covsteer
