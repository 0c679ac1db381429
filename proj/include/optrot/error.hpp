#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace optrot {

// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad arguments, shape mismatches and invalid configurations.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// A numerical kernel could not produce a valid result.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// Factorization hit a pivot that is negative beyond tolerance.
class FactorizationError : public NumericalError {
 public:
  FactorizationError(std::size_t pivot, double value)
      : NumericalError("LDL factorization failed at pivot " + std::to_string(pivot) +
                       " (value " + std::to_string(value) + ")"),
        pivot_(pivot),
        value_(value) {}

  std::size_t pivot() const noexcept { return pivot_; }
  double value() const noexcept { return value_; }

 private:
  std::size_t pivot_;
  double value_;
};

class ConvergenceError : public NumericalError {
 public:
  ConvergenceError(const std::string& what, double residual)
      : NumericalError(what + " (residual " + std::to_string(residual) + ")"), residual_(residual) {}

  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace optrot
