#pragma once

#include <stdexcept>
#include <string>

namespace vapf {

// Each error family maps to one CLI exit code (see tools/vapf.cpp).

struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Raised when a caller breaks an API precondition that is not a shape
/// problem, e.g. stepping the optimizer without gradients.
struct ContractError : std::logic_error {
  using std::logic_error::logic_error;
};

struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// BACC/F1/AUC requested on input where the metric is undefined.
struct MetricError : std::domain_error {
  using std::domain_error::domain_error;
};

struct VerificationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace vapf
