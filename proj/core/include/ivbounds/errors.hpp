#pragma once

#include <stdexcept>
#include <string>

namespace ivbounds {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed, degenerate, or insufficient input data.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration or argument values.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Numerical failure inside fitting or optimization.
class SolverError : public Error {
 public:
  using Error::Error;
};

}  // namespace ivbounds
