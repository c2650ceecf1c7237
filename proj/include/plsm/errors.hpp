#pragma once

#include <stdexcept>
#include <string>

namespace plsm {

/// Raised when an argument violates a documented precondition (shape, range, finiteness).
class ValidationError : public std::invalid_argument {
public:
    explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
};

/// Raised for malformed configuration files. Carries the 1-based source line when known.
class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& what, int line = 0)
        : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line)
    {}
    int line() const noexcept { return line_; }

private:
    int line_;
};

/// Raised when a stored artifact cannot be decoded.
class FormatError : public std::runtime_error {
public:
    explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

/// Raised when a computation fails at run time (diverging loss, oracle mismatch).
class RuntimeFailure : public std::runtime_error {
public:
    explicit RuntimeFailure(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace plsm
