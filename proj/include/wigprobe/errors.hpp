#pragma once

#include <stdexcept>
#include <string>

namespace wigprobe {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration or argument (CLI exit code 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed or missing input data (CLI exit code 3).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Numerical failure: ill-conditioning, failed fits, degenerate solves (CLI exit code 4).
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Probability mass pushed past the end of a truncated Fock ladder exceeded the tolerance.
class TruncationError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace wigprobe
