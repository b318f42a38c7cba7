#pragma once

#include <stdexcept>
#include <string>

namespace hoplab {

/// Bad user input: malformed config values, window <= overlap, k < 1, ...
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Schema violations in datasets, corpora, logs; carries a line number when known.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& what, long line = -1)
        : std::runtime_error(line >= 0 ? "line " + std::to_string(line) + ": " + what : what),
          line_(line) {}
    long line() const { return line_; }

private:
    long line_;
};

/// Malformed byte sequences where valid UTF-8 is required.
class DecodeError : public std::runtime_error {
public:
    explicit DecodeError(const std::string& what) : std::runtime_error(what) {}
};

/// Filesystem trouble: missing files, failed writes.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

/// Backend call failed after the retry budget, or was non-retryable.
class GatewayError : public std::runtime_error {
public:
    explicit GatewayError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace hoplab
