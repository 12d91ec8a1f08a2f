#pragma once

#include <stdexcept>
#include <string>

namespace uplift {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// A treatment or control cohort required by an operation is empty.
class EmptyCohortError : public Error {
 public:
  explicit EmptyCohortError(const std::string& msg) : Error(msg) {}
};

/// Malformed input row; carries the 1-based row number of the offending line.
class ParseError : public Error {
 public:
  ParseError(const std::string& msg, long row)
      : Error(msg + " (row " + std::to_string(row) + ")"), row_(row) {}
  long row() const { return row_; }

 private:
  long row_;
};

/// A required column is missing or the header does not match the schema.
class SchemaError : public Error {
 public:
  explicit SchemaError(const std::string& msg) : Error(msg) {}
};

/// Invalid network architecture (zero widths, wrong output dimension, ...).
class InvalidShapeError : public Error {
 public:
  explicit InvalidShapeError(const std::string& msg) : Error(msg) {}
};

/// Dimensions of two arguments do not agree.
class ShapeMismatchError : public Error {
 public:
  explicit ShapeMismatchError(const std::string& msg) : Error(msg) {}
};

/// An objective or gradient evaluated to NaN or infinity.
class NonFiniteError : public Error {
 public:
  explicit NonFiniteError(const std::string& msg) : Error(msg) {}
};

/// A linear system is rank-deficient and no regularization was requested.
class SingularSystemError : public Error {
 public:
  explicit SingularSystemError(const std::string& msg) : Error(msg) {}
};

/// A metric is undefined for the given inputs (zero denominator, empty curve).
class UndefinedError : public Error {
 public:
  explicit UndefinedError(const std::string& msg) : Error(msg) {}
};

/// Configuration violates a documented precondition.
class InvalidConfigError : public Error {
 public:
  explicit InvalidConfigError(const std::string& msg) : Error(msg) {}
};

}  // namespace uplift
