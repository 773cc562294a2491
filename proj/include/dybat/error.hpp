#pragma once

#include <stdexcept>
#include <string>

namespace dybat {

/// Shape/dimension disagreement between tensors or masks.
struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Invalid values in data (labels outside {0,1,2,4}, probabilities outside [0,1], ...).
struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Non-finite intermediate results (NaN/Inf in losses, gradients, function evaluations).
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Bad run configuration: out-of-range hyperparameters, unknown keys, missing keys.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Violated operation precondition (e.g. Hausdorff distance on an empty mask).
struct PreconditionError : std::runtime_error {
    explicit PreconditionError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Filesystem problems: unreadable corpus, short files, unwritable output dirs.
struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace dybat
