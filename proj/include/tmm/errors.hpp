#pragma once

#include <stdexcept>
#include <string>

namespace tmm {

// Invalid or inconsistent user-supplied input (config, preconditions).
// The CLI maps this to exit code 2.
struct ConfigError : std::invalid_argument {
    explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

// Numerical failure at runtime (instability, non-convergence, rank loss).
// The CLI maps this to exit code 3.
struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace tmm
