#pragma once

#include <stdexcept>
#include <string>

namespace elglm {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Operand shapes do not agree.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Singular or indefinite systems, non-finite intermediates, non-convergence.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// Argument outside the domain where an operation is defined
/// (table range, negative rate, rho out of range, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Malformed configuration or file content.
class ConfigError : public Error {
public:
    using Error::Error;
};

} // namespace elglm
