#pragma once

#include <complex>
#include <stdexcept>
#include <string>

namespace freecap {

/// Argument outside the mathematical domain of an operation (poles, negative ratios, ...).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Input data violating a structural contract (unnormalized density, shape mismatch, ...).
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Iterative solver gave up. Carries the last iterate and its residual for diagnostics.
class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, std::complex<double> last_iterate, double residual)
        : std::runtime_error(what), last_iterate_(last_iterate), residual_(residual) {}

    std::complex<double> last_iterate() const noexcept { return last_iterate_; }
    double residual() const noexcept { return residual_; }

private:
    std::complex<double> last_iterate_;
    double residual_;
};

}  // namespace freecap
