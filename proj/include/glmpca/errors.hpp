#pragma once

#include <stdexcept>
#include <string>

namespace glmpca {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An argument lies outside the domain of a family function.
class DomainError : public Error {
public:
    using Error::Error;
};

/// An observation lies outside the support of the noise model, or input is malformed.
class DataError : public Error {
public:
    using Error::Error;
};

/// Inconsistent dimensions, rank-deficient designs, invalid options.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// The objective or an intermediate quantity became non-finite.
class NumericError : public Error {
public:
    using Error::Error;
};

/// A Fisher information column is identically zero (zero penalty and zero partner column).
class DegenerateColumnError : public Error {
public:
    using Error::Error;
};

/// Projection step could not be carried out (rank-deficient covariates).
class PostprocessError : public Error {
public:
    using Error::Error;
};

/// Text input could not be parsed. `line()` is 1-based, 0 when unknown.
class ParseError : public DataError {
public:
    ParseError(const std::string& what, std::size_t line)
        : DataError(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

} // namespace glmpca
