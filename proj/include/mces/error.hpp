#pragma once

#include <stdexcept>
#include <string>

namespace mces {

// Exception families. The CLI maps them onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad configuration or mismatched dimensions (exit code 1).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed or invalid input data (exit code 2).
class DataError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf, divergence, non-deterministic forward passes (exit code 3).
class NumericalError : public Error {
 public:
  using Error::Error;
};

// API misuse such as backward before forward or an out-of-range index.
class StateError : public Error {
 public:
  using Error::Error;
};

}  // namespace mces
