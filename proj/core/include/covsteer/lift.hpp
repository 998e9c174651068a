#pragma once

#include "covsteer/kalman.hpp"
#include "covsteer/linalg.hpp"
#include "covsteer/model.hpp"

namespace covsteer {

/// Stacked block operators of the filtered-state process
///     X̂ = A x̂_{0⁻} + B U + L Ỹ
/// over k = 0..N, together with the cost weights and the covariance S of
/// A (x̂_{0⁻} − x̄_0) + L Ỹ.
///
/// Selector matrices E_k are implicit: block k of a stacked state vector
/// occupies rows [k·n_x, (k+1)·n_x).
struct LiftedOperators {
    int horizon = 0;
    Eigen::Index nx = 0;
    Eigen::Index nu = 0;
    Eigen::Index ny = 0;

    Matrix A;               ///< (N+1)n_x × n_x
    Matrix B;               ///< (N+1)n_x × N n_u, strictly block lower-triangular
    Matrix L;               ///< (N+1)n_x × (N+1)n_y, block lower-triangular
    Matrix Q;               ///< blkdiag(Q_0, …, Q_{N−1}, 0)
    Matrix R;               ///< blkdiag(R_0, …, R_{N−1})
    Matrix innovation_cov;  ///< blkdiag(P_{ỹ_{0⁻}}, …, P_{ỹ_{N⁻}})
    Matrix S;               ///< A P̂_{0⁻} A' + L P_Ỹ L'
    Matrix S_half;          ///< S_half' S_half = S

    [[nodiscard]] Eigen::Index state_dim() const { return (horizon + 1) * nx; }
    [[nodiscard]] Eigen::Index input_dim() const { return horizon * nu; }
    [[nodiscard]] Eigen::Index state_offset(int k) const { return k * nx; }
    [[nodiscard]] Eigen::Index input_offset(int k) const { return k * nu; }

    /// E_k X for a stacked state vector X.
    [[nodiscard]] Vector select(const Vector& stacked, int k) const { return stacked.segment(state_offset(k), nx); }
    /// Block rows of E_k M for a stacked-state-row matrix M.
    [[nodiscard]] Matrix select_rows(const Matrix& m, int k) const { return m.middleRows(state_offset(k), nx); }
};

namespace lift {

LiftedOperators build(const SteeringProblem& problem, const FilterSchedule& schedule);

/// Factor S_half = Λ^{1/2} V' of a symmetric PSD matrix; negative or
/// round-off sized eigenvalues are clipped to zero.
Matrix noise_cov_factor(const Matrix& S);

}  // namespace lift
}  // namespace covsteer
