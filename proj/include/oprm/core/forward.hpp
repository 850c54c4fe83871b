#pragma once

#include <span>
#include <vector>

#include "oprm/core/block.hpp"
#include "oprm/core/distribution.hpp"
#include "oprm/core/model.hpp"
#include "oprm/core/state.hpp"

namespace oprm {

/// Activations of one forward pass over a token run, for backprop.
struct SequenceCache {
  std::vector<TokenId> tokens;
  std::vector<BlockCache> blocks;
  Matrix top;  // residual stream leaving the last block, L x d
};

/// Runs every block over `tokens`, advancing `state`. Returns the top
/// residual stream (L x d). Throws UsageError on out-of-vocabulary ids.
Matrix forward_tokens(const ModelParams& params, std::span<const TokenId> tokens, HiddenState& state,
                      SequenceCache* cache = nullptr);

/// Final RMSNorm + output head on one residual row.
RowVector head_logits(const ModelParams& params, const RowVector& residual);

struct Prefilled {
  HiddenState state;
  OutputDistribution dist;
};

/// Consumes a nonempty prompt from the zero state; returns the final state
/// and the next-token distribution after the last prompt token.
Prefilled model_prefill(const ModelParams& params, std::span<const TokenId> tokens);

/// Continues from `state` (given a prior prefill or step) by one token.
OutputDistribution model_step(const ModelParams& params, HiddenState& state, TokenId token);

}  // namespace oprm
