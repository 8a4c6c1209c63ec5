#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rla {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid parameters or preconditions (bad config, empty election, ...).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Malformed input file. Line and column are 1-based; 0 means "not applicable".
class ParseError : public Error {
public:
    ParseError(std::string message, std::size_t line, std::size_t column)
        : Error(format(message, line, column)), line_(line), column_(column) {}

    std::size_t line() const noexcept { return line_; }
    std::size_t column() const noexcept { return column_; }

private:
    static std::string format(const std::string& message, std::size_t line, std::size_t column) {
        if (line == 0) return message;
        std::string out = "line " + std::to_string(line);
        if (column != 0) out += ", column " + std::to_string(column);
        return out + ": " + message;
    }

    std::size_t line_;
    std::size_t column_;
};

/// A persisted artifact failed its content digest check.
class IntegrityError : public Error {
public:
    using Error::Error;
};

/// An operation was invoked in a state that does not permit it.
class StateError : public Error {
public:
    using Error::Error;
};

/// Optimistic concurrency check failed (another writer got there first).
class ConflictError : public Error {
public:
    using Error::Error;
};

}  // namespace rla
