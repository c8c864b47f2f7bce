#pragma once

#include <stdexcept>
#include <string>

namespace seagle {

// Base of every error raised by the library. Subclasses identify the failure
// domain so that batch drivers can record a per-gene reason and continue.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Argument outside its valid domain (non-positive variance component, bad config).
class ParameterError : public Error {
public:
    using Error::Error;
};

/// Dimension mismatch between operands.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// A matrix that must be symmetric positive definite failed to factor.
class ConditioningError : public Error {
public:
    using Error::Error;
};

/// Covariate design is numerically rank deficient.
class RankError : public Error {
public:
    RankError(const std::string& what, long column) : Error(what), column_(column) {}
    long column() const noexcept { return column_; }

private:
    long column_;
};

/// Non-finite intermediate values or a failed decomposition.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// Malformed input file; carries the 1-based line number when known.
class ParseError : public Error {
public:
    ParseError(const std::string& what, long line = 0) : Error(what), line_(line) {}
    long line() const noexcept { return line_; }

private:
    long line_;
};

/// Simulation could not produce valid data (e.g. monomorphic genotype column).
class GenerationError : public Error {
public:
    using Error::Error;
};

/// Filesystem failure; message includes the path.
class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace seagle
