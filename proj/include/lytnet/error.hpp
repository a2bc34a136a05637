#pragma once

#include <stdexcept>
#include <string>

namespace lytnet {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Incompatible operator/layer configuration (channel counts, dimensions).
class ConfigurationError : public Error {
public:
    using Error::Error;
};

/// A configuration error raised while executing a specific network row.
class LayerError : public ConfigurationError {
public:
    LayerError(int row, const std::string& what)
        : ConfigurationError("layer " + std::to_string(row) + ": " + what), row_(row) {}

    int row() const noexcept { return row_; }

private:
    int row_;
};

/// Data that violates an invariant (non-finite weights, odd pooling dims,
/// bad class index, weight-file shape mismatches).
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Malformed on-disk data: weight files, PPM images, label CSVs, JSON.
class FormatError : public Error {
public:
    using Error::Error;
};

/// A direction vector of zero length, so no angle can be defined.
class UndefinedDirectionError : public Error {
public:
    using Error::Error;
};

/// A point whose projective w-component is at or behind the horizon.
class DegeneratePointError : public Error {
public:
    using Error::Error;
};

/// Guidance session misuse, e.g. non-increasing timestamps.
class SessionError : public Error {
public:
    using Error::Error;
};

}  // namespace lytnet
