#pragma once

#include <stdexcept>
#include <string>

namespace lnsm {

struct ValidationError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Bad configuration key or value; the message names the key.
struct ConfigError : ValidationError {
  using ValidationError::ValidationError;
};

struct NoRootError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Raised when a kernel grid cannot resolve the momentum function.
struct ResolutionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SingularityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConvergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SignProblemError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

} // namespace lnsm
