#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "covsteer/kalman.hpp"
#include "covsteer/model.hpp"
#include "covsteer/policy.hpp"

namespace covsteer {

struct SimulationOptions {
    std::size_t runs = 100000;
    std::uint64_t seed = 20190610;
    /// 0 picks the hardware concurrency; COVSTEER_THREADS caps either choice.
    unsigned threads = 0;
    /// Runs per independently seeded batch.  Results depend on it, not on threads.
    std::size_t batch_size = 2048;
    /// Number of leading runs whose state trajectories are kept.
    std::size_t trajectories = 0;
    /// Two-sided level of the Clopper–Pearson intervals.
    double confidence = 0.99;
};

/// Empirical statistics at one step.  Every z value is |sample − analytic|
/// divided by a Gaussian standard error, maximized over entries.
struct StepStatistics {
    int step = 0;
    std::size_t violations = 0;
    double rate = 0.0;
    double rate_lower = 0.0;
    double rate_upper = 0.0;

    Vector sample_mean;
    Matrix sample_cov;  ///< of x_k
    double cov_z = 0.0;

    Matrix error_sample_cov;  ///< of x̃_k = x_k − x̂_k against P̃_k
    double error_cov_z = 0.0;

    Matrix cross_moment;  ///< E[(x̂_k − x̄_k) x̃_k'] against 0
    double cross_z = 0.0;

    Matrix innovation_lag;  ///< E[ỹ_k ỹ_{k+1}'] against 0 (empty at k = N)
    double innovation_z = 0.0;
    double innovation_autocorr = 0.0;  ///< largest |correlation| at lag 1
};

struct SimulationReport {
    std::size_t runs = 0;
    std::uint64_t seed = 0;
    std::string generator;
    std::size_t batch_size = 0;
    double confidence = 0.0;
    double p_fail = 0.0;

    std::vector<StepStatistics> steps;
    double max_violation_rate = 0.0;
    int worst_step = 0;

    Vector terminal_mean;
    Matrix terminal_cov;

    double max_cov_z = 0.0;
    double max_error_cov_z = 0.0;
    double max_cross_z = 0.0;
    double max_innovation_z = 0.0;
    double max_innovation_autocorr = 0.0;

    /// trajectories[r][k] = x_k of run r.
    std::vector<std::vector<Vector>> trajectories;
};

/// Number of worker threads after applying COVSTEER_THREADS.
unsigned resolve_threads(unsigned requested);

/// Clopper–Pearson interval for `successes` out of `trials` at the given two-sided level.
std::pair<double, double> clopper_pearson(std::size_t successes, std::size_t trials, double confidence);

/// Monte Carlo of plant, Kalman filter and policy.  Identical options give a
/// bitwise-identical report for any thread count.
SimulationReport run_closed_loop(const SteeringProblem& problem, const FilterSchedule& schedule, const Policy& policy,
                                 const SimulationOptions& options);

}  // namespace covsteer
