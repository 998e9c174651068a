#pragma once

#include <string>

#include "covsteer/kalman.hpp"
#include "covsteer/model.hpp"
#include "covsteer/policy.hpp"
#include "covsteer/simulate.hpp"
#include "covsteer/transcribe.hpp"

namespace covsteer::io {

/// Shortest text that is still exact: printf "%.17g".
std::string format_double(double value);

struct PolicyMetadata {
    std::string config_sha256;
    std::string tool_version;
    std::string solver;
    std::string status;
    int iterations = 0;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    double gap = 0.0;
    std::string terminal_norm;
};

std::string policy_to_json(const Policy& policy, const ConstraintAudit& audit, const PolicyMetadata& meta);

struct LoadedPolicy {
    Policy policy;
    std::string config_sha256;
};

/// Restores everything simulate needs (gains, feedforward, mean, covariances).
/// Throws std::runtime_error on malformed input.
LoadedPolicy policy_from_json(const std::string& text);

/// step,constraint,value,slack rows, then terminal rows.
std::string audit_csv(const ConstraintAudit& audit);

/// step,x_0..x_{n-1}
std::string mean_csv(const Policy& policy);

/// Boundary points of {z : (z − μ)'Σ^{-1}(z − μ) = sigma²} for the (i, j)
/// marginal of P_k ("total") and P̂_k ("filtered") at every step.
std::string ellipse_csv(const Policy& policy, int i, int j, double sigma, int points = 64);

/// One row per step: k, vec(L_k), vec(P̃_k), vec(P̃_{k⁻}), vec(P_{ỹ_{k⁻}}), column-major.
std::string schedule_csv(const FilterSchedule& schedule);

std::string report_to_json(const SimulationReport& report, const std::string& config_sha256,
                           const std::string& policy_sha256);

/// run,step,x_0..x_{n-1}
std::string trajectories_csv(const SimulationReport& report);

}  // namespace covsteer::io
