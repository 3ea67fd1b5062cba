#pragma once

#include <stdexcept>

namespace soclift {

// Bad user input: malformed config files, unknown ids, dimension mismatches.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Numerical breakdown: failed factorizations, non-convergent iterations,
// rejection-sampling caps.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace soclift
