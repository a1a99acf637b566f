#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cnnqoe {

// Shape/dimension mismatch between tensors or between a tensor and an operator.
struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// A scalar argument is out of its legal range (dilation < 1, bad probability, ...).
struct ParameterError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Numeric breakdown: non-finite values, zero-norm directions, undefined correlations.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invalid model or run configuration (reported violations joined into the message).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Semantically invalid trace data or an impossible data request.
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed trace text; carries the 1-based line number of the offending line.
struct ParseError : std::runtime_error {
    ParseError(std::size_t line_number, const std::string& what)
        : std::runtime_error("line " + std::to_string(line_number) + ": " + what),
          line(line_number) {}
    std::size_t line;
};

// A split protocol cannot be satisfied (empty sets, missing metadata, ...).
struct SplitError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Grid search over an empty or fully invalid candidate space.
struct SearchError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Unreadable, truncated, or corrupt model file.
struct LoadError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace cnnqoe
