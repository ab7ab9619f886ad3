#pragma once

#include <stdexcept>
#include <string>

namespace respicast {

// Invalid arguments or configuration. CLI maps this to exit code 2.
struct ParameterError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed or inconsistent input data. CLI maps this to exit code 4.
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// MCMC failed its convergence contract. Carries the diagnostic summary.
// CLI maps this to exit code 3.
struct ConvergenceError : std::runtime_error {
    explicit ConvergenceError(const std::string& msg, std::string diag = {})
        : std::runtime_error(msg), diagnostics(std::move(diag)) {}
    std::string diagnostics;
};

// Particle filter collapsed (all weights -inf) on a given day.
// CLI maps this to exit code 5.
struct DegeneracyError : std::runtime_error {
    DegeneracyError(const std::string& msg, std::string day_iso_)
        : std::runtime_error(msg), day_iso(std::move(day_iso_)) {}
    std::string day_iso;
};

// Numerical failure (e.g. covariance solve did not recover with jitter).
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace respicast
