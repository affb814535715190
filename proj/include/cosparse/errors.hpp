#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cosparse {

// Negative or non-finite difference order.
class InvalidOrderError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Empty or duplicated order set.
class InvalidOrderSetError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class InvalidShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DimensionMismatchError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Pooled analysis coefficients were all zero, so no Laplacian scale exists.
class DegenerateSigmaError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class UnderdeterminedFitError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class UndefinedPrdError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class NotSupportedError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Bad experiment configuration: unknown key, malformed value, violated precondition.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t row)
      : std::runtime_error(row == 0 ? what : "row " + std::to_string(row) + ": " + what),
        row_(row) {}

  // 1-based line number in the source, 0 when not tied to a row.
  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

}  // namespace cosparse
