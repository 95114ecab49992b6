#pragma once

#include <stdexcept>
#include <string>

namespace ddil {

// Invalid configuration: bad grid sizes, mismatched grids, invalid priors.
// The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A timestep that is not on the grid an operation requires.
class GridError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Vector lengths or architectures that do not line up.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Timesteps passed in the wrong order to a solver step.
class OrderingError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Missing or unusable input data.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// NaN/inf during evaluation or training. The CLI maps this to exit code 3.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ddil
