#pragma once

#include <stdexcept>
#include <string>

namespace tvflow {

/// Caller broke a precondition (shape mismatch, bad argument).
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Invalid solver or experiment configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Iteration produced non-finite values.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, long iteration)
      : std::runtime_error(what + " (iteration " + std::to_string(iteration) + ")"),
        message_(what),
        iteration_(iteration) {}
  long iteration() const { return iteration_; }
  /// The message without the iteration suffix.
  const std::string& message() const { return message_; }

 private:
  std::string message_;
  long iteration_;
};

/// Malformed or unreadable file.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace tvflow
