#include "covsteer/kalman.hpp"

#include <limits>
#include <string>

namespace covsteer {

IllPosedObservation::IllPosedObservation(int step, double condition)
    : std::runtime_error("innovation covariance is numerically singular at step " + std::to_string(step) +
                         " (condition number " + std::to_string(condition) + ")"),
      step_(step),
      condition_(condition) {}

namespace kalman {

Matrix predict_error_cov(const Matrix& posterior, const Matrix& A, const Matrix& G) {
    linalg::require_square(posterior, "predict_error_cov: P");
    linalg::require_shape(A, posterior.rows(), posterior.rows(), "predict_error_cov: A");
    if (G.rows() != posterior.rows()) {
        throw DimensionError("predict_error_cov: G must have " + std::to_string(posterior.rows()) + " rows");
    }
    return linalg::symmetrized(A * posterior * A.transpose() + G * G.transpose());
}

Matrix innovation_cov(const Matrix& prior, const Matrix& C, const Matrix& D) {
    linalg::require_square(prior, "innovation_cov: P");
    linalg::require_shape(C, C.rows(), prior.rows(), "innovation_cov: C");
    linalg::require_shape(D, C.rows(), C.rows(), "innovation_cov: D");
    return linalg::symmetrized(C * prior * C.transpose() + D * D.transpose());
}

GainResult kalman_gain(const Matrix& prior, const Matrix& C, const Matrix& D) {
    GainResult out;
    out.innovation_cov = innovation_cov(prior, C, D);
    Eigen::SelfAdjointEigenSolver<Matrix> es(out.innovation_cov, Eigen::EigenvaluesOnly);
    const double lo = es.eigenvalues().minCoeff();
    const double hi = es.eigenvalues().maxCoeff();
    const double condition = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
    if (!(condition <= kMaxInnovationCondition)) {
        throw IllPosedObservation(-1, condition);
    }
    Eigen::LLT<Matrix> llt(out.innovation_cov);
    // L' = Py^{-1} C P
    out.gain = llt.solve(C * prior).transpose();
    return out;
}

Matrix update_error_cov(const Matrix& prior, const Matrix& L, const Matrix& C, const Matrix& D) {
    linalg::require_square(prior, "update_error_cov: P");
    const Eigen::Index nx = prior.rows();
    linalg::require_shape(C, C.rows(), nx, "update_error_cov: C");
    linalg::require_shape(L, nx, C.rows(), "update_error_cov: L");
    linalg::require_shape(D, C.rows(), C.rows(), "update_error_cov: D");
    const Matrix I_LC = Matrix::Identity(nx, nx) - L * C;
    const Matrix LD = L * D;
    return linalg::symmetrized(I_LC * prior * I_LC.transpose() + LD * LD.transpose());
}

FilterSchedule run_schedule(const SteeringProblem& problem) {
    if (problem.horizon < 1) {
        throw DimensionError("run_schedule: horizon must be positive");
    }
    const auto N = static_cast<std::size_t>(problem.horizon);
    if (problem.C.size() != N + 1 || problem.D.size() != N + 1 || problem.A.size() != N ||
        problem.G.size() != N) {
        throw DimensionError("run_schedule: system matrix sequences do not match the horizon");
    }

    FilterSchedule s;
    s.gains.reserve(N + 1);
    s.posterior_error_cov.reserve(N + 1);
    s.prior_error_cov.reserve(N + 1);
    s.innovation_cov.reserve(N + 1);

    Matrix prior = linalg::symmetrized(problem.prior_error_cov);
    for (std::size_t k = 0; k <= N; ++k) {
        GainResult g;
        try {
            g = kalman_gain(prior, problem.C[k], problem.D[k]);
        } catch (const IllPosedObservation& e) {
            throw IllPosedObservation(static_cast<int>(k), e.condition());
        }
        Matrix posterior = update_error_cov(prior, g.gain, problem.C[k], problem.D[k]);
        s.prior_error_cov.push_back(prior);
        s.gains.push_back(std::move(g.gain));
        s.innovation_cov.push_back(std::move(g.innovation_cov));
        if (k < N) {
            prior = predict_error_cov(posterior, problem.A[k], problem.G[k]);
        }
        s.posterior_error_cov.push_back(std::move(posterior));
    }
    return s;
}

}  // namespace kalman
}  // namespace covsteer
