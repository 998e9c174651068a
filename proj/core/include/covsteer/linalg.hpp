#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace covsteer {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Raised when operand shapes do not agree.
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised when a matrix that must be symmetric is too far from it.
class SymmetryError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

namespace linalg {

inline constexpr double kSymmetryTol = 1e-9;
inline constexpr double kDefiniteTol = 1e-9;

void require_shape(const Matrix& m, Eigen::Index rows, Eigen::Index cols, const std::string& what);
void require_square(const Matrix& m, const std::string& what);

/// (X + X') / 2.
Matrix symmetrized(const Matrix& x);

/// Largest |X_ij - X_ji|.
double asymmetry(const Matrix& x);

/// Symmetrizes X when its asymmetry is below kSymmetryTol relative to max(1, ‖X‖_max);
/// throws SymmetryError otherwise.
Matrix checked_symmetric(const Matrix& x, const std::string& what);

/// Smallest eigenvalue of a symmetric matrix (0x0 -> +inf).
double min_eigenvalue(const Matrix& x);

/// PSD check: λ_min ≥ -tol·max(1, |λ|_max).
bool is_psd(const Matrix& x, double rel_tol = kDefiniteTol);

/// PD check: λ_min > tol·max(1, |λ|_max).
bool is_pd(const Matrix& x, double rel_tol = kDefiniteTol);

/// Factor R with R'R = X for symmetric PSD X, via eigendecomposition R = Λ^{1/2} V'.
/// Eigenvalues below clip_rel·λ_max (including negative ones) are set to zero.
Matrix psd_factor(const Matrix& x, double clip_rel = 1e-13);

/// Symmetric inverse square root X^{-1/2} of a PD matrix.
Matrix inverse_sqrt(const Matrix& x);

/// Maximum absolute entry (0 for empty).
double max_abs(const Matrix& x);

/// Block-diagonal concatenation.
Matrix block_diagonal(const std::vector<Matrix>& blocks);

}  // namespace linalg
}  // namespace covsteer
