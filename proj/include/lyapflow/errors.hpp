#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lyapflow {

/// Bad argument to a library call (shape, range, empty input).
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Malformed family or experiment specification.
class InvalidSpecification : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Configuration file or flag problem (maps to CLI exit code 2).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Syntax error in a coefficient expression; `position` is a 0-based offset.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& msg, std::size_t position)
        : std::runtime_error(msg + " at position " + std::to_string(position)), position_(position) {}
    std::size_t position() const noexcept { return position_; }

private:
    std::size_t position_;
};

/// Unknown identifier in a coefficient expression.
class NameError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Expression cannot be differentiated symbolically (min/max).
class UnsupportedExpression : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Operation precondition violated by the model rather than by the call.
class PreconditionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Base for numerical failures (maps to CLI exit code 3).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Tangent frame lost rank; the caller should restart with a fresh frame.
class DegenerateFrame : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// State norm exceeded the explosion threshold.
class ExplosionError : public NumericalError {
public:
    ExplosionError(const std::string& msg, long step)
        : NumericalError(msg + " (step " + std::to_string(step) + ")"), step_(step) {}
    long step() const noexcept { return step_; }

private:
    long step_;
};

/// Every tangent column fell below the underflow threshold.
class UnderflowError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// Exponent estimation gave up after repeated frame restarts.
class EstimationFailed : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// Trajectory blew up while sampling an invariant measure.
class NonDissipative : public NumericalError {
public:
    using NumericalError::NumericalError;
};

}  // namespace lyapflow
