#pragma once

#include <cstddef>
#include <memory>
#include <span>

#include "oprm/core/distribution.hpp"
#include "oprm/core/model.hpp"
#include "oprm/core/state.hpp"

namespace oprm::engine {

/// Opaque recurrent state owned by a backend session.
class SessionState {
 public:
  virtual ~SessionState() = default;
  virtual std::unique_ptr<SessionState> clone() const = 0;
};

struct PrefillResult {
  std::unique_ptr<SessionState> state;
  OutputDistribution dist;
};

/// What the inference engine needs from a recurrent language model. Both
/// calls must be safe to run concurrently on distinct states.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::size_t vocab_size() const = 0;
  /// State and next-token distribution after a nonempty prompt.
  virtual PrefillResult prefill(std::span<const TokenId> tokens) const = 0;
  /// Advances `state` by one token; returns the next-token distribution.
  virtual OutputDistribution step(SessionState& state, TokenId token) const = 0;
};

/// Backend over the gated S6 model. Holds a reference; `params` must outlive it.
class ModelBackend final : public Backend {
 public:
  explicit ModelBackend(const ModelParams& params) : params_(params) {}

  std::size_t vocab_size() const override { return static_cast<std::size_t>(params_.config().vocab_size); }
  PrefillResult prefill(std::span<const TokenId> tokens) const override;
  OutputDistribution step(SessionState& state, TokenId token) const override;

  /// The model state behind a session handle produced by this backend.
  static const HiddenState& hidden(const SessionState& state);

 private:
  const ModelParams& params_;
};

}  // namespace oprm::engine
