#pragma once

#include <iosfwd>

#include "covsteer/conic.hpp"

namespace covsteer {

struct InteriorPointSettings {
    int max_iterations = 200;
    double feasibility_tol = 1e-8;
    double absolute_gap_tol = 1e-8;
    double relative_gap_tol = 1e-8;
    /// Fraction of the distance to the cone boundary taken per step.
    double step_fraction = 0.99;
    /// Upper bound; refinement stops early once the KKT residual stops shrinking.
    int refinement_steps = 8;
    /// Diagonal shift added to the reduced KKT matrix, relative to the largest squared column norm of G.
    double regularization = 1e-13;
    /// When the iteration cap or a stall is hit, accept the iterate as optimal
    /// if every stopping measure is within this factor of its tolerance.
    double inaccurate_factor = 10.0;
    std::ostream* log = nullptr;
};

/// Primal-dual interior-point method on the homogeneous self-dual embedding
/// with Nesterov–Todd scaling and a Mehrotra predictor-corrector.  Handles
/// zero, nonnegative, second-order, rotated second-order, and semidefinite
/// cones.  Infeasibility and unboundedness are reported from the embedding's
/// certificates once τ vanishes relative to κ.
class InteriorPointSolver final : public ConicSolver {
public:
    InteriorPointSolver() = default;
    explicit InteriorPointSolver(InteriorPointSettings settings) : settings_(settings) {}

    [[nodiscard]] ConicSolution solve(const ConicProgram& program) const override;
    [[nodiscard]] std::string name() const override { return "covsteer-hsde-ipm"; }
    [[nodiscard]] bool supports(ConeKind) const override { return true; }

    [[nodiscard]] const InteriorPointSettings& settings() const { return settings_; }

private:
    InteriorPointSettings settings_;
};

}  // namespace covsteer
