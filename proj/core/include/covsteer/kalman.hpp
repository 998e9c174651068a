#pragma once

#include <stdexcept>
#include <vector>

#include "covsteer/linalg.hpp"
#include "covsteer/model.hpp"

namespace covsteer {

/// Control-independent Kalman quantities for k = 0..N.
struct FilterSchedule {
    std::vector<Matrix> gains;                ///< L_k, n_x × n_y
    std::vector<Matrix> posterior_error_cov;  ///< P̃_k
    std::vector<Matrix> prior_error_cov;      ///< P̃_{k⁻}
    std::vector<Matrix> innovation_cov;       ///< P_{ỹ_{k⁻}}

    [[nodiscard]] int horizon() const { return static_cast<int>(gains.size()) - 1; }
};

/// The innovation covariance of some step is numerically singular.
class IllPosedObservation : public std::runtime_error {
public:
    IllPosedObservation(int step, double condition);

    [[nodiscard]] int step() const { return step_; }
    [[nodiscard]] double condition() const { return condition_; }

private:
    int step_;
    double condition_;
};

namespace kalman {

inline constexpr double kMaxInnovationCondition = 1e12;

/// A P A' + G G'.
Matrix predict_error_cov(const Matrix& posterior, const Matrix& A, const Matrix& G);

/// C P C' + D D'.
Matrix innovation_cov(const Matrix& prior, const Matrix& C, const Matrix& D);

struct GainResult {
    Matrix gain;
    Matrix innovation_cov;
};

/// L = P C' (C P C' + D D')^{-1}. Throws IllPosedObservation (step -1) when the
/// innovation covariance has condition number above kMaxInnovationCondition.
GainResult kalman_gain(const Matrix& prior, const Matrix& C, const Matrix& D);

/// Joseph form (I - L C) P (I - L C)' + L D D' L'; PSD for any gain L.
Matrix update_error_cov(const Matrix& prior, const Matrix& L, const Matrix& C, const Matrix& D);

/// Measurement update at k using P̃_{k⁻}, then prediction to k+1, for k = 0..N.
FilterSchedule run_schedule(const SteeringProblem& problem);

}  // namespace kalman
}  // namespace covsteer
