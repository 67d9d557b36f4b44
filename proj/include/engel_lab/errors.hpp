#pragma once

#include <stdexcept>
#include <string>

namespace engel_lab {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad arguments or violated preconditions at the API boundary.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// A query left the valid region of a chart, or hit a non-finite value.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A frame or matrix that had to be non-degenerate was not.
class RankError : public Error {
 public:
  using Error::Error;
};

/// Rejected model definition (antisymmetry, Jacobi, schema).
class ModelError : public Error {
 public:
  using Error::Error;
};

/// Numerics could not decide (no dominance, unwrapping ambiguity, ...).
class InconclusiveError : public Error {
 public:
  using Error::Error;
};

/// A geometric check failed in a way that aborts the requested construction.
class CheckFailed : public Error {
 public:
  using Error::Error;
};

/// The requested quantity is not defined for this model.
class UnsupportedError : public Error {
 public:
  using Error::Error;
};

/// Expression parse failure with a 1-based column.
class ParseError : public Error {
 public:
  ParseError(const std::string& message, int column)
      : Error(message + " at column " + std::to_string(column)), column_(column) {}
  int column() const noexcept { return column_; }

 private:
  int column_;
};

}  // namespace engel_lab
