#pragma once

#include <iosfwd>
#include <string>

namespace covsteer::cli {

enum ExitCode : int {
    kOk = 0,
    kUsage = 1,
    kValidation = 2,
    kInfeasible = 3,
    kNumerical = 4,
    kHashMismatch = 5,
};

/// Lowercase hex SHA-256 of the bytes.
std::string sha256_hex(const std::string& bytes);

/// Entry point shared by the executable and the tests.  Returns the exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace covsteer::cli
