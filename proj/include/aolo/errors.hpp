#pragma once

#include <stdexcept>
#include <string>

namespace aolo {

/// Argument outside the mathematical domain of an operation.
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

/// Root-finding bracket whose endpoints do not straddle a sign change.
struct BracketError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Iterative method (quadrature, root finding) failed to meet its tolerance.
struct ConvergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Tensor or vector shapes that do not chain.
struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Raised when training produces a non-finite loss or parameter.
struct TrainingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace aolo
