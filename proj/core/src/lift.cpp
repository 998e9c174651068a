#include "covsteer/lift.hpp"

namespace covsteer::lift {

LiftedOperators build(const SteeringProblem& problem, const FilterSchedule& schedule) {
    const int N = problem.horizon;
    if (N < 1 || schedule.horizon() != N) {
        throw DimensionError("lift::build: schedule horizon does not match problem horizon");
    }
    const Eigen::Index nx = problem.nx();
    const Eigen::Index nu = problem.nu();
    const Eigen::Index ny = problem.ny();
    for (int k = 0; k <= N; ++k) {
        linalg::require_shape(schedule.gains[k], nx, ny, "lift::build: L_" + std::to_string(k));
    }

    LiftedOperators ops;
    ops.horizon = N;
    ops.nx = nx;
    ops.nu = nu;
    ops.ny = ny;
    const Eigen::Index n_state = ops.state_dim();

    // transition[k] = A_{k-1} ... A_0
    std::vector<Matrix> transition(N + 1);
    transition[0] = Matrix::Identity(nx, nx);
    for (int k = 1; k <= N; ++k) {
        transition[k] = problem.A[k - 1] * transition[k - 1];
    }
    ops.A.resize(n_state, nx);
    for (int k = 0; k <= N; ++k) {
        ops.A.middleRows(k * nx, nx) = transition[k];
    }

    // Column block j of B and L is propagated forward from the step it enters.
    ops.B = Matrix::Zero(n_state, N * nu);
    for (int j = 0; j < N; ++j) {
        Matrix col = problem.B[j];
        for (int k = j + 1; k <= N; ++k) {
            ops.B.block(k * nx, j * nu, nx, nu) = col;
            if (k < N) {
                col = problem.A[k] * col;
            }
        }
    }
    ops.L = Matrix::Zero(n_state, (N + 1) * ny);
    for (int j = 0; j <= N; ++j) {
        Matrix col = schedule.gains[j];
        for (int k = j; k <= N; ++k) {
            ops.L.block(k * nx, j * ny, nx, ny) = col;
            if (k < N) {
                col = problem.A[k] * col;
            }
        }
    }

    std::vector<Matrix> q_blocks(problem.Q.begin(), problem.Q.end());
    q_blocks.push_back(Matrix::Zero(nx, nx));
    ops.Q = linalg::block_diagonal(q_blocks);
    ops.R = linalg::block_diagonal(problem.R);
    ops.innovation_cov = linalg::block_diagonal(schedule.innovation_cov);

    ops.S = linalg::symmetrized(ops.A * problem.prior_estimate_cov * ops.A.transpose() +
                                ops.L * ops.innovation_cov * ops.L.transpose());
    ops.S_half = noise_cov_factor(ops.S);
    return ops;
}

Matrix noise_cov_factor(const Matrix& S) {
    linalg::require_square(S, "noise_cov_factor");
    const double scale = std::max(1.0, linalg::max_abs(S));
    if (linalg::asymmetry(S) > linalg::kSymmetryTol * scale) {
        throw SymmetryError("noise_cov_factor: S is not symmetric");
    }
    return linalg::psd_factor(S);
}

}  // namespace covsteer::lift
