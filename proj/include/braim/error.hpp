#pragma once

#include <stdexcept>
#include <string>

namespace braim {

// Malformed numeric input: non-symmetric matrices, dimension mismatches, probabilities outside (0,1).
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// The user state is not determined by the measurements (rank(H) < 4).
class UnobservableState : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Scenario or campaign configuration that cannot be simulated.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A numerical search that could not satisfy its stopping rule.
class NumericalFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace braim
