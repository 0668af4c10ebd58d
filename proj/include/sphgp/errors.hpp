#pragma once

#include <stdexcept>
#include <string>

namespace sphgp {

/// Linear algebra or quadrature produced something that violates a positivity contract.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shapes of points, features or state vectors disagree.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Input data is malformed or incompatible with the requested task.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A run configuration failed validation.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace sphgp
