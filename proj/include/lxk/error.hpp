#ifndef LXK_ERROR_HPP
#define LXK_ERROR_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

/**
 * @file error.hpp
 *
 * @brief Exception hierarchy shared by every module.
 */

namespace lxk {

/**
 * Base class for all toolkit errors. `kind()` is a short machine-readable tag
 * that the command-line tool reports alongside the message.
 */
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& message) : std::runtime_error(message) {}
    virtual const char* kind() const noexcept { return "error"; }
};

/// Bad argument values or incompatible inputs to an operation.
class ArgumentError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "argument"; }
};

/// Malformed input file content.
class ParseError : public Error {
public:
    ParseError(const std::string& message, std::size_t line)
        : Error("line " + std::to_string(line) + ": " + message), line_(line) {}
    explicit ParseError(const std::string& message) : Error(message), line_(0) {}

    const char* kind() const noexcept override { return "parse"; }
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Well-formed input that violates a data invariant.
class ValidationError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "validation"; }
};

/// A segment or word type whose representation collapses to the zero vector.
class DegenerateError : public ValidationError {
public:
    using ValidationError::ValidationError;
    const char* kind() const noexcept override { return "degenerate"; }
};

/// A dense computation would exceed the configured memory budget.
class BudgetError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "budget"; }
};

/// A file could not be opened, read or written.
class IoError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "io"; }
};

}  // namespace lxk

#endif
