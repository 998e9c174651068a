#pragma once

#include <stdexcept>
#include <string>

#include "covsteer/model.hpp"

namespace covsteer {

/// Malformed or incomplete problem file; the message names the offending key.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Parses a problem from JSON text.
///
/// Matrices are row-major nested arrays.  Inside `dynamics`, `observation` and
/// `cost`, each matrix may be a single 2-D array (repeated at every step), an
/// array of 2-D arrays (one per step), `{"constant": true, "value": M}`, or
/// `{"diag": [...]}`; a section-level `"constant": true` requires single
/// matrices.  Constraints without `risk` share `risk.p_fail` equally.
SteeringProblem parse_config(const std::string& text);

SteeringProblem load_config(const std::string& path);

/// Whole file as bytes; throws ConfigError when unreadable.
std::string read_file(const std::string& path);

}  // namespace covsteer
