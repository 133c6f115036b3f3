#pragma once

#include <stdexcept>
#include <string>

namespace qt {

// Dimension or size disagreement between tensors.
struct ShapeError : std::runtime_error {
  explicit ShapeError(const std::string& what) : std::runtime_error(what) {}
};

// Bad scalar argument (invalid bounds, non-positive weight, ...).
struct ValueError : std::runtime_error {
  explicit ValueError(const std::string& what) : std::runtime_error(what) {}
};

// Unusable input data (empty sentence, empty corpus, ...).
struct InputError : std::runtime_error {
  explicit InputError(const std::string& what) : std::runtime_error(what) {}
};

// Inconsistent or unsatisfiable configuration.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed text input; message carries the offending line number.
struct ParseError : std::runtime_error {
  explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

// Structurally invalid binary or structured file.
struct FormatError : std::runtime_error {
  explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

// Non-finite values where finite ones are required.
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

// Mathematically undefined result (all-masked softmax row, zero-norm cosine,
// zero-variance correlation, single-class task, batch with no predictions).
struct DegenerateError : std::runtime_error {
  explicit DegenerateError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace qt
