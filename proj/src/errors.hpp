#pragma once

#include <stdexcept>
#include <string>

namespace rareebm {

// Invalid user configuration (bad indices, unknown keys, out-of-range knobs).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical failure: non-PSD covariance, non-finite gradient, zero normaliser.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Argument outside the support of a density or the domain of a grid.
class DomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A statistical estimate could not be formed (too few or degenerate samples).
class EstimationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace rareebm
