#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace dspec {

/// Error taxonomy shared across the library. `kind()` is a stable
/// machine-readable tag; the CLI emits it in its error line.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& msg)
        : std::runtime_error(msg), kind_(std::move(kind)) {}
    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

/// Invalid configuration: bad shapes, unknown presets, out-of-range knobs.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& m) : Error("config", m) {}
};

/// API misuse: calling operations out of order or with impossible arguments.
class UsageError : public Error {
public:
    explicit UsageError(const std::string& m) : Error("usage", m) {}
};

/// Bad input data: malformed records, labels outside the class universe.
class DataError : public Error {
public:
    explicit DataError(const std::string& m) : Error("data", m) {}
};

/// Engine produced a non-finite value.
class NumericError : public Error {
public:
    explicit NumericError(const std::string& m) : Error("numeric", m) {}
};

/// File format or filesystem failure.
class IoError : public Error {
public:
    explicit IoError(const std::string& m) : Error("io", m) {}
};

} // namespace dspec
