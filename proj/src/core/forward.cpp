#include "oprm/core/forward.hpp"

#include <cmath>

#include "oprm/errors.hpp"

namespace oprm {

Matrix forward_tokens(const ModelParams& params, std::span<const TokenId> tokens, HiddenState& state,
                      SequenceCache* cache) {
  const auto& cfg = params.config();
  Matrix u(static_cast<Eigen::Index>(tokens.size()), cfg.d);
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    if (tokens[t] < 0 || tokens[t] >= cfg.vocab_size) throw UsageError("token id outside vocabulary");
    u.row(static_cast<Eigen::Index>(t)) = params.embed.row(tokens[t]);
  }
  if (cache) {
    cache->tokens.assign(tokens.begin(), tokens.end());
    cache->blocks.resize(params.blocks.size());
  }
  for (std::size_t l = 0; l < params.blocks.size(); ++l)
    u = mamba_block_forward(params.blocks[l], u, state.layers[l], cache ? &cache->blocks[l] : nullptr,
                            state.position);
  state.position += static_cast<std::int64_t>(tokens.size());
  if (cache) cache->top = u;
  return u;
}

RowVector head_logits(const ModelParams& params, const RowVector& residual) {
  const double inv_rms =
      1.0 / std::sqrt(residual.squaredNorm() / static_cast<double>(residual.size()) + kRmsEps);
  const RowVector z = (residual * inv_rms).cwiseProduct(params.final_norm);
  return z * params.head;
}

namespace {

OutputDistribution last_distribution(const ModelParams& params, const Matrix& top) {
  const RowVector logits = head_logits(params, top.row(top.rows() - 1));
  return OutputDistribution::from_logits({logits.data(), static_cast<std::size_t>(logits.size())});
}

}  // namespace

Prefilled model_prefill(const ModelParams& params, std::span<const TokenId> tokens) {
  if (tokens.empty()) throw UsageError("prefill requires a nonempty prompt");
  HiddenState state = HiddenState::zeros(params.config());
  const Matrix top = forward_tokens(params, tokens, state);
  return {std::move(state), last_distribution(params, top)};
}

OutputDistribution model_step(const ModelParams& params, HiddenState& state, TokenId token) {
  const TokenId one[] = {token};
  const Matrix top = forward_tokens(params, one, state);
  return last_distribution(params, top);
}

}  // namespace oprm
