#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace convsearch {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Caller violated an operation precondition (k = 0, turn out of range, ...).
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Malformed input file. `line()` is 1-based, 0 when the error is not tied to a line.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line = 0)
        : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

/// Replay-only lookup found nothing under the key. Not retriable.
class CacheMiss : public Error {
public:
    explicit CacheMiss(const std::string& key)
        : Error("cache miss: " + key), key_(key) {}

    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

/// Network or protocol failure talking to a remote service. Retriable.
class TransportError : public Error {
public:
    using Error::Error;
};

}  // namespace convsearch
