#include "covsteer/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace covsteer::linalg {

void require_shape(const Matrix& m, Eigen::Index rows, Eigen::Index cols, const std::string& what) {
    if (m.rows() != rows || m.cols() != cols) {
        throw DimensionError(what + ": expected " + std::to_string(rows) + "x" + std::to_string(cols) +
                             ", got " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
    }
}

void require_square(const Matrix& m, const std::string& what) {
    if (m.rows() != m.cols()) {
        throw DimensionError(what + ": expected a square matrix, got " + std::to_string(m.rows()) + "x" +
                             std::to_string(m.cols()));
    }
}

Matrix symmetrized(const Matrix& x) {
    return 0.5 * (x + x.transpose());
}

double asymmetry(const Matrix& x) {
    if (x.rows() != x.cols()) {
        return std::numeric_limits<double>::infinity();
    }
    return x.size() == 0 ? 0.0 : (x - x.transpose()).cwiseAbs().maxCoeff();
}

Matrix checked_symmetric(const Matrix& x, const std::string& what) {
    require_square(x, what);
    const double scale = std::max(1.0, max_abs(x));
    if (asymmetry(x) > kSymmetryTol * scale) {
        throw SymmetryError(what + ": asymmetry " + std::to_string(asymmetry(x)) + " exceeds tolerance");
    }
    return symmetrized(x);
}

double min_eigenvalue(const Matrix& x) {
    if (x.size() == 0) {
        return std::numeric_limits<double>::infinity();
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(x), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

namespace {

double eig_scale(const Vector& ev) {
    return std::max(1.0, ev.cwiseAbs().maxCoeff());
}

}  // namespace

bool is_psd(const Matrix& x, double rel_tol) {
    if (x.rows() != x.cols()) {
        return false;
    }
    if (x.size() == 0) {
        return true;
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(x), Eigen::EigenvaluesOnly);
    const Vector& ev = es.eigenvalues();
    return ev.minCoeff() >= -rel_tol * eig_scale(ev);
}

bool is_pd(const Matrix& x, double rel_tol) {
    if (x.rows() != x.cols()) {
        return false;
    }
    if (x.size() == 0) {
        return true;
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(x), Eigen::EigenvaluesOnly);
    const Vector& ev = es.eigenvalues();
    return ev.minCoeff() > rel_tol * eig_scale(ev);
}

Matrix psd_factor(const Matrix& x, double clip_rel) {
    require_square(x, "psd_factor");
    if (x.size() == 0) {
        return Matrix(0, 0);
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(x));
    Vector ev = es.eigenvalues();
    const double top = std::max(0.0, ev.maxCoeff());
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
        ev(i) = ev(i) > clip_rel * top ? std::sqrt(ev(i)) : 0.0;
    }
    return ev.asDiagonal() * es.eigenvectors().transpose();
}

Matrix inverse_sqrt(const Matrix& x) {
    require_square(x, "inverse_sqrt");
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(x));
    const Vector& ev = es.eigenvalues();
    if (x.size() > 0 && ev.minCoeff() <= 0.0) {
        throw std::domain_error("inverse_sqrt: matrix is not positive definite");
    }
    return es.eigenvectors() * ev.cwiseSqrt().cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
}

double max_abs(const Matrix& x) {
    return x.size() == 0 ? 0.0 : x.cwiseAbs().maxCoeff();
}

Matrix block_diagonal(const std::vector<Matrix>& blocks) {
    Eigen::Index rows = 0;
    Eigen::Index cols = 0;
    for (const auto& b : blocks) {
        rows += b.rows();
        cols += b.cols();
    }
    Matrix out = Matrix::Zero(rows, cols);
    Eigen::Index r = 0;
    Eigen::Index c = 0;
    for (const auto& b : blocks) {
        out.block(r, c, b.rows(), b.cols()) = b;
        r += b.rows();
        c += b.cols();
    }
    return out;
}

}  // namespace covsteer::linalg
