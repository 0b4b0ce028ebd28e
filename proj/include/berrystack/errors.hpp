#pragma once

#include <stdexcept>
#include <string>

namespace berrystack {

// Error taxonomy shared by every module. The CLI maps these onto exit codes:
// usage/config -> 2, data/format -> 3, numeric -> 4.

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ArgumentError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public ArgumentError {
 public:
  using ArgumentError::ArgumentError;
};

class DegenerateInputError : public ArgumentError {
 public:
  using ArgumentError::ArgumentError;
};

class ConfigError : public ArgumentError {
 public:
  using ArgumentError::ArgumentError;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class StateError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public NumericError {
 public:
  using NumericError::NumericError;
};

}  // namespace berrystack
