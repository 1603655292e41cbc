#pragma once

#include <stdexcept>
#include <string>

namespace somtom {

/// Base class for all errors raised by this library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Input violates a documented precondition or schema.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Not enough data to run an estimator (e.g. fewer than 4 correspondences).
class InsufficientDataError : public Error {
public:
    using Error::Error;
};

/// Estimation problem is rank-deficient or otherwise unsolvable.
class DegenerateConfigurationError : public Error {
public:
    using Error::Error;
};

/// Robust fit could not find a model with enough inliers.
class RobustFitError : public Error {
public:
    using Error::Error;
};

/// Malformed input file; message carries the line number where known.
class ParseError : public Error {
public:
    using Error::Error;
};

/// A metric has no defined value on the given inputs.
class UndefinedMetricError : public Error {
public:
    using Error::Error;
};

/// A projective map sent a point to infinity.
class PointAtInfinityError : public Error {
public:
    using Error::Error;
};

/// Bad pipeline or CLI configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace somtom
