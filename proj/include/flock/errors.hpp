#pragma once

#include <stdexcept>
#include <string>

namespace flock {

/// Bad shapes, out-of-range indices, non-finite inputs.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An operation invoked on objects that do not belong together
/// (wrong architecture, a tape from a different forward pass).
class InvalidState : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Infeasible or inconsistent configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed, truncated or corrupted file.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace flock
