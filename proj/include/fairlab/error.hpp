#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fairlab {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A configuration or argument violates its documented invariants.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

/// Malformed input file. `row()` is the 1-based data row (header excluded),
/// or 0 when the problem is in the header itself.
class ParseError : public Error {
 public:
  ParseError(std::size_t row, const std::string& what)
      : Error(row == 0 ? "header: " + what
                       : "row " + std::to_string(row) + ": " + what),
        row_(row) {}

  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

/// One of the positive-label subgroups (y=1, a=0) / (y=1, a=1) is empty.
class MissingSubgroup : public Error {
 public:
  using Error::Error;
};

/// FNR is undefined because a positive subgroup has no members.
class UndefinedFnr : public Error {
 public:
  using Error::Error;
};

class NotFound : public Error {
 public:
  using Error::Error;
};

class Infeasible : public Error {
 public:
  using Error::Error;
};

class NonFiniteLoss : public Error {
 public:
  explicit NonFiniteLoss(long step)
      : Error("non-finite loss at step " + std::to_string(step)), step_(step) {}

  long step() const noexcept { return step_; }

 private:
  long step_;
};

}  // namespace fairlab
