#pragma once

#include <stdexcept>
#include <string>

namespace mocos {

// Bad input: malformed layout, config, file, or shape. Maps to CLI exit code 1.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Non-finite values, solver non-convergence. Maps to CLI exit code 2.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ParseError : public ValidationError {
public:
    ParseError(std::size_t line, const std::string& what)
        : ValidationError("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

} // namespace mocos
