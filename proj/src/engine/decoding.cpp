#include "oprm/engine/decoding.hpp"

#include <algorithm>
#include <cmath>

#include "oprm/errors.hpp"

namespace oprm::engine {

void Decoding::validate() const {
  if (kind == Kind::temperature && !(temperature > 0.0)) throw UsageError("sampling temperature must be positive");
}

Sampler::Sampler(const Decoding& decoding, std::uint64_t stream) : decoding_(decoding) {
  decoding_.validate();
  std::seed_seq seq{static_cast<std::uint32_t>(decoding.seed), static_cast<std::uint32_t>(decoding.seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  rng_.seed(seq);
}

TokenId Sampler::operator()(const OutputDistribution& dist) {
  if (decoding_.kind == Decoding::Kind::greedy) return dist.argmax();
  // p^(1/T), renormalized by discrete_distribution.
  std::vector<double> w(dist.size());
  const double inv_t = 1.0 / decoding_.temperature;
  const auto probs = dist.probs();
  std::transform(probs.begin(), probs.end(), w.begin(), [inv_t](double p) { return p > 0.0 ? std::pow(p, inv_t) : 0.0; });
  std::discrete_distribution<TokenId> pick(w.begin(), w.end());
  return pick(rng_);
}

std::vector<TokenId> decode_autoregressive(const Backend& backend, SessionState& state, TokenId first_token,
                                           Sampler& sampler, int max_new_tokens, std::span<const TokenId> stops) {
  std::vector<TokenId> out;
  if (max_new_tokens <= 0) return out;
  auto is_stop = [&](TokenId t) { return std::find(stops.begin(), stops.end(), t) != stops.end(); };
  out.push_back(first_token);
  while (static_cast<int>(out.size()) < max_new_tokens && !is_stop(out.back()))
    out.push_back(sampler(backend.step(state, out.back())));
  return out;
}

}  // namespace oprm::engine
