#pragma once

#include <stdexcept>
#include <string>

namespace pathint {

/// Base class for all library errors.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// A point fell outside the declared chart domain, or a time outside a path's domain.
struct DomainError : Error {
    using Error::Error;
};

/// Caller violated a precondition (mismatched bases, misaligned grids, ...).
struct UsageError : Error {
    using Error::Error;
};

/// Adaptive step-size control underflowed; carries the time actually reached.
struct IntegrationError : Error {
    double t_reached;
    IntegrationError(const std::string& msg, double reached)
        : Error(msg + " (reached t=" + std::to_string(reached) + ")"), t_reached(reached) {}
};

/// Gram-Schmidt input was rank deficient.
struct DegenerateFrameError : Error {
    using Error::Error;
};

/// A Gram matrix failed to be positive definite; carries the smallest eigenvalue.
struct DegenerateMetricError : Error {
    double min_eigenvalue;
    DegenerateMetricError(const std::string& msg, double min_eig)
        : Error(msg + " (min eigenvalue " + std::to_string(min_eig) + ")"),
          min_eigenvalue(min_eig) {}
};

/// A series or quadrature could not reach the requested accuracy.
struct AccuracyError : Error {
    double achieved;
    AccuracyError(const std::string& msg, double bound)
        : Error(msg + " (achieved bound " + std::to_string(bound) + ")"), achieved(bound) {}
};

/// Numerical failure that is not an accuracy shortfall (NaN/Inf, FD step underflow, ...).
struct NumericalError : Error {
    using Error::Error;
};

/// Invalid run configuration; message carries file:line anchoring where available.
struct ConfigError : Error {
    using Error::Error;
};

/// Requested work exceeds a declared cost cap; message suggests the cap.
struct CostCapError : Error {
    using Error::Error;
};

}  // namespace pathint
