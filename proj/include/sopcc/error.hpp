#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sopcc {

/// Bad argument to an operation (out-of-range parameter, empty input, ...).
class ParameterError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Instance cannot be built (too few vertices, bad start/goal, ...).
class InvalidInstanceError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class InvalidEdgeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class InvalidPathError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Text input could not be parsed. `line()` is 1-based, 0 when unknown.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t line)
        : std::runtime_error(line == 0 ? what : "line " + std::to_string(line) + ": " + what),
          line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class ClosureError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Exhaustive enumeration refused because the instance is too large.
class SizeCapError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A produced result broke one of its documented invariants.
class InvariantViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

} // namespace sopcc
