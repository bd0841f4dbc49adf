#pragma once

#include <stdexcept>
#include <string>

namespace phc {

// Base of every error the toolkit throws on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad user input: flags, files, out-of-range parameters. CLI exit code 2.
class ParameterError : public Error {
 public:
  using Error::Error;
};

// Invalid cavity geometry (overlapping holes, broken mirror symmetry).
class GeometryError : public Error {
 public:
  using Error::Error;
};

// Numerical failure: divergence, non-convergence, degenerate data. CLI exit code 1.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class StabilityError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class DivergenceError : public NumericalError {
 public:
  DivergenceError(long step, const std::string& what)
      : NumericalError(what), step_(step) {}
  long step() const { return step_; }

 private:
  long step_;
};

class DegenerateError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace phc
