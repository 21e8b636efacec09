#pragma once

#include <stdexcept>
#include <string>

namespace sdar {

// Base for everything thrown by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad scenario / config input. CLI exit code 2.
struct ConfigError : Error {
  using Error::Error;
};

// Numerical failure (non-convergence, singular system, ...). CLI exit code 3.
struct NumericError : Error {
  using Error::Error;
};

struct NoConvergence : NumericError {
  using NumericError::NumericError;
};

struct RowSumViolation : NumericError {
  using NumericError::NumericError;
};

struct SingularSystem : NumericError {
  using NumericError::NumericError;
};

struct StateSpaceTooLarge : NumericError {
  using NumericError::NumericError;
};

struct NoAttempts : NumericError {
  using NumericError::NumericError;
};

struct NoDepartures : NumericError {
  using NumericError::NumericError;
};

struct InconsistentThroughput : NumericError {
  using NumericError::NumericError;
};

struct EmptyRun : NumericError {
  using NumericError::NumericError;
};

}  // namespace sdar
