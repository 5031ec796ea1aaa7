#pragma once

#include <stdexcept>
#include <string>

namespace burnmap {

// Error taxonomy mirrors the CLI exit codes: config 2, data 3, numeric 4.

/// Malformed or inconsistent configuration / file headers.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Bad input data: shape mismatches, out-of-range parameters, missing
/// artifacts, precondition violations.
struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Numerical breakdown: non-finite inputs, rank-deficient or degenerate fits.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace burnmap
