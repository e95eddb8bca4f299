#pragma once

#include <stdexcept>
#include <string>

namespace spur {

// Bad input to a library call (invalid distribution, unknown axis, ...).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Experiment configuration rejected before any run starts.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Posterior recovery matrix fails the conditioning threshold.
class SingularRecovery : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace spur
