#pragma once

#include <stdexcept>
#include <string>

namespace wkam {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Coupling matrix validation.
class RowSumViolation : public Error {
 public:
  RowSumViolation(int row, double sum)
      : Error("RowSumViolation: row " + std::to_string(row) +
              " sums to " + std::to_string(sum) + " (expected 0)"),
        row_(row) {}
  int row() const { return row_; }

 private:
  int row_;
};

class SignViolation : public Error {
 public:
  SignViolation(int row, int col)
      : Error("SignViolation: off-diagonal entry (" + std::to_string(row) +
              ", " + std::to_string(col) + ") is positive"),
        row_(row),
        col_(col) {}
  int row() const { return row_; }
  int col() const { return col_; }

 private:
  int row_, col_;
};

class Reducible : public Error {
 public:
  explicit Reducible(std::string subset)
      : Error("Reducible: index subset " + subset +
              " has no outgoing negative entry"),
        subset_(std::move(subset)) {}
  const std::string& subset() const { return subset_; }

 private:
  std::string subset_;
};

class ShiftBeyondHorizon : public Error {
 public:
  using Error::Error;
};

class UnboundedInput : public Error {
 public:
  using Error::Error;
};

class HistoryExplosion : public Error {
 public:
  using Error::Error;
};

class SuperlinearityViolation : public Error {
 public:
  using Error::Error;
};

class HorizonExceeded : public Error {
 public:
  using Error::Error;
};

class SentinelVelocity : public Error {
 public:
  using Error::Error;
};

class SeedNotNegative : public Error {
 public:
  using Error::Error;
};

class NoConvergence : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace wkam
