#pragma once

#include <stdexcept>
#include <string>

namespace surfacenet {

/// Base class for every error thrown by the library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& message) : std::runtime_error(message) {}
};

/// Invalid configuration, schema violation, or bad user parameter.
/// The CLI maps this to exit code 2.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// File system or file format problem.
class IoError : public Error {
public:
    using Error::Error;
};

/// Violated runtime precondition on domain data (shapes, ranges, normals).
class ValidationError : public Error {
public:
    using Error::Error;
};

} // namespace surfacenet
