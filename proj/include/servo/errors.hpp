#ifndef SERVO_ERRORS_HPP
#define SERVO_ERRORS_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace servo {

// Base for all library errors. Subtypes are split into configuration
// errors (bad inputs, exit code 1 at the CLI) and runtime failures
// (I/O and environment, exit code 2).
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : Error {
    using Error::Error;
};

struct RuntimeFailure : Error {
    using Error::Error;
};

// Point has depth Z <= 0: target behind or on the camera plane.
struct NonPositiveDepth : ConfigError {
    using ConfigError::ConfigError;
};

// No target pixel projects inside the image.
struct TargetNotVisible : ConfigError {
    using ConfigError::ConfigError;
};

struct ShapeMismatch : ConfigError {
    using ConfigError::ConfigError;
};

struct DepthCountMismatch : ConfigError {
    using ConfigError::ConfigError;
};

struct DimensionMismatch : ConfigError {
    using ConfigError::ConfigError;
};

// backward() called without a matching stored forward pass.
struct StaleForwardState : ConfigError {
    using ConfigError::ConfigError;
};

struct InvalidArchitecture : ConfigError {
    InvalidArchitecture(const std::string& msg, std::size_t index)
        : ConfigError(msg), layer_index(index) {}
    std::size_t layer_index;
};

struct EmptyDataset : ConfigError {
    using ConfigError::ConfigError;
};

struct InvalidSplit : ConfigError {
    using ConfigError::ConfigError;
};

// Pose sampling exceeded its rejection bound: range mostly out of view.
struct UnviableRange : ConfigError {
    using ConfigError::ConfigError;
};

struct IoFailure : RuntimeFailure {
    using RuntimeFailure::RuntimeFailure;
};

}  // namespace servo

#endif
