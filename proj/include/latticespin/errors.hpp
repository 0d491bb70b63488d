#pragma once

#include <stdexcept>
#include <string>

namespace latticespin {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad arguments or violated preconditions (empty grids, dimension mismatches, eps <= 0, ...).
class UsageError : public Error {
public:
    using Error::Error;
};

/// The model itself misbehaves, e.g. the local drift evaluates to a non-finite value.
class ModelError : public Error {
public:
    using Error::Error;
};

/// A structural requirement of the chain is broken (zero subdiagonal coupling, missing jets).
class StructuralError : public Error {
public:
    using Error::Error;
};

/// Monte Carlo estimation could not produce a trustworthy answer (too many blowups).
class EstimationError : public Error {
public:
    using Error::Error;
};

/// Numerical linear algebra failed (ill-conditioned Hermite system, integration blowup).
class NumericalError : public Error {
public:
    using Error::Error;
};

} // namespace latticespin
