#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace oprm {

/// Caller supplied arguments that violate an operation's preconditions.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A computation produced a non-finite value. `step()` carries the sequence
/// position or training step where it was first observed, when known.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what, std::optional<std::int64_t> step = std::nullopt)
      : std::runtime_error(step ? what + " (step " + std::to_string(*step) + ")" : what), step_(step) {}

  std::optional<std::int64_t> step() const { return step_; }

 private:
  std::optional<std::int64_t> step_;
};

}  // namespace oprm
