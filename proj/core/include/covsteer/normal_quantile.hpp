#pragma once

namespace covsteer {

/// Standard normal CDF Φ(x).
double normal_cdf(double x);

/// Φ^{-1}(p) for p ∈ (0, 1): rational approximation refined by one Halley step.
/// Throws std::domain_error outside (0, 1).
double normal_quantile(double p);

}  // namespace covsteer
