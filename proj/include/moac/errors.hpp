#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace moac {

/// Invalid argument supplied by the caller (bad probability, non-finite θ, ...).
class ParameterError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// The MOMDP (or the chain induced by a policy) violates a structural requirement.
class ModelError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A modelling assumption needed by an oracle fails numerically (e.g. λ_A ≈ 0).
class AssumptionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An iterative solver hit its cap without producing its certificate.
class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, double residual)
        : std::runtime_error(what), residual_(residual) {}
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

/// Iterates blew up. `iteration` is 1-based within the phase that diverged.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(const std::string& what, std::size_t iteration)
        : std::runtime_error(what), iteration_(iteration) {}
    std::size_t iteration() const noexcept { return iteration_; }

private:
    std::size_t iteration_;
};

/// Logged data that cannot be scored.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace moac
