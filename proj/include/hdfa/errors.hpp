#pragma once

#include <stdexcept>
#include <string>

namespace hdfa {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// A precondition on an argument was violated (bad shape, bad range, ...).
class InvalidInput : public Error {
 public:
  explicit InvalidInput(const std::string& msg) : Error(msg) {}
};

/// Two matrix/vector arguments have incompatible shapes.
class ShapeMismatch : public Error {
 public:
  explicit ShapeMismatch(const std::string& msg) : Error(msg) {}
};

/// A matrix required to be symmetric positive definite is not.
/// Carries the index of the Cholesky pivot that failed and its value.
class NotPositiveDefinite : public Error {
 public:
  NotPositiveDefinite(const std::string& msg, int pivot_index, double pivot_value)
      : Error(msg), pivot_index(pivot_index), pivot_value(pivot_value) {}
  int pivot_index;
  double pivot_value;
};

/// A data column has zero sample variance, so correlations are undefined.
class DegenerateColumn : public Error {
 public:
  DegenerateColumn(const std::string& msg, int column)
      : Error(msg), column(column) {}
  int column;
};

/// The requested (test, correction, calibration) combination is not defined.
class UnsupportedCombination : public Error {
 public:
  explicit UnsupportedCombination(const std::string& msg) : Error(msg) {}
};

}  // namespace hdfa
