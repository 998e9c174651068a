#pragma once

#include <string>
#include <vector>

#include "covsteer/linalg.hpp"

namespace covsteer {

struct FilterSchedule;

/// Probabilistic half-plane constraint P(α'x > β) ≤ risk.
struct HalfPlaneConstraint {
    Vector alpha;
    double beta = 0.0;
    double risk = 0.0;
};

/// Output-feedback covariance steering instance over steps k = 0..N.
///
/// Dynamics x_{k+1} = A_k x_k + B_k u_k + G_k w_k hold for k < N and the
/// observation y_k = C_k x_k + D_k v_k is taken for every k ≤ N.  The initial
/// state is the sum of independent estimate and error parts,
/// x̂_{0⁻} ~ N(x̄_0, P̂_{0⁻}) and x̃_{0⁻} ~ N(0, P̃_{0⁻}).
struct SteeringProblem {
    int horizon = 0;

    std::vector<Matrix> A;  ///< N matrices, n_x × n_x
    std::vector<Matrix> B;  ///< N matrices, n_x × n_u
    std::vector<Matrix> G;  ///< N matrices, n_x × n_w
    std::vector<Matrix> C;  ///< N+1 matrices, n_y × n_x
    std::vector<Matrix> D;  ///< N+1 matrices, n_y × n_y

    Vector prior_mean;
    Matrix prior_estimate_cov;
    Matrix prior_error_cov;

    Vector target_mean;
    Matrix target_cov_bound;

    std::vector<Matrix> Q;  ///< N matrices, n_x × n_x
    std::vector<Matrix> R;  ///< N matrices, n_u × n_u

    std::vector<HalfPlaneConstraint> constraints;
    double total_risk = 0.0;

    [[nodiscard]] Eigen::Index nx() const { return prior_mean.size(); }
    [[nodiscard]] Eigen::Index nu() const { return B.empty() ? 0 : B.front().cols(); }
    [[nodiscard]] Eigen::Index nw() const { return G.empty() ? 0 : G.front().cols(); }
    [[nodiscard]] Eigen::Index ny() const { return C.empty() ? 0 : C.front().rows(); }
};

/// Builds a problem whose system and cost matrices repeat at every step.
SteeringProblem make_time_invariant(int horizon, const Matrix& A, const Matrix& B, const Matrix& G,
                                    const Matrix& C, const Matrix& D, const Matrix& Q, const Matrix& R);

struct ValidationCheck {
    std::string name;
    bool passed = true;
    std::string message;
};

/// Itemized outcome of validate(); never throws.
struct ValidationReport {
    std::vector<ValidationCheck> checks;

    [[nodiscard]] bool ok() const;
    [[nodiscard]] std::vector<std::string> failures() const;
};

ValidationReport validate(const SteeringProblem& problem);

/// Copy of the problem with every symmetric input replaced by (X + X')/2.
/// Throws SymmetryError when an input is asymmetric beyond tolerance.
SteeringProblem symmetrized(const SteeringProblem& problem);

struct PrecheckResult {
    bool passed = false;
    double tolerance = 0.0;
    double min_margin_eigenvalue = 0.0;  ///< λ_min(P_f − P̃_N)
    Vector margin_eigenvalues;           ///< eig(P_f − P̃_N), ascending
    Vector error_cov_eigenvalues;        ///< eig(P̃_N), ascending
    std::string message;
};

/// The terminal bound is attainable only if P_f − P̃_N ≻ tolerance·I.
PrecheckResult feasibility_precheck(const SteeringProblem& problem, const FilterSchedule& schedule,
                                    double tolerance = 1e-9);

}  // namespace covsteer
