#pragma once

#include <stdexcept>
#include <string>

namespace ldg {

/// Raised when a caller violates an operation's preconditions (wrong vector
/// dimension, empty batch, out-of-range fraction).
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Configuration rejected by validation. `what()` lists every problem, one
/// per line, each prefixed with its field path.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A remote supervisor failed to answer. The rollout can be resumed from the
/// last epoch checkpoint.
class SupervisorUnavailable : public std::runtime_error {
 public:
  enum class Reason { Timeout, Disconnected, Stopped };

  SupervisorUnavailable(Reason reason, const std::string& message)
      : std::runtime_error(message), reason_(reason) {}

  Reason reason() const noexcept { return reason_; }

 private:
  Reason reason_;
};

}  // namespace ldg
