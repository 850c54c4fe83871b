#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "oprm/core/distribution.hpp"
#include "oprm/engine/backend.hpp"

namespace oprm::engine {

/// The decoding rule applied to every output distribution.
struct Decoding {
  enum class Kind { greedy, temperature };
  Kind kind = Kind::greedy;
  double temperature = 1.0;
  std::uint64_t seed = 0;

  /// Throws UsageError unless temperature > 0 when sampling.
  void validate() const;
};

/// Stateful application of a Decoding rule. Each chunk gets its own stream so
/// results do not depend on the order in which chunks are processed.
class Sampler {
 public:
  Sampler(const Decoding& decoding, std::uint64_t stream);

  TokenId operator()(const OutputDistribution& dist);

 private:
  Decoding decoding_;
  std::mt19937_64 rng_;
};

/// Emits `first_token`, then repeatedly steps `state` and samples until a
/// stop token has been emitted or `max_new_tokens` tokens exist.
std::vector<TokenId> decode_autoregressive(const Backend& backend, SessionState& state, TokenId first_token,
                                           Sampler& sampler, int max_new_tokens, std::span<const TokenId> stops);

}  // namespace oprm::engine
