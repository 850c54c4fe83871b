#include "oprm/engine/selection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "oprm/engine/parallel.hpp"
#include "oprm/errors.hpp"

namespace oprm::engine {

double entropy_score(const OutputDistribution& dist) {
  double h = 0.0;
  for (double p : dist.probs())
    if (p > 0.0) h -= p * std::log2(p);
  return std::max(0.0, h);
}

std::vector<ChunkScore> speculative_prefill(const Backend& backend, std::span<const std::vector<TokenId>> prompts,
                                            const PrefillOptions& options) {
  if (prompts.empty()) throw UsageError("speculative prefill needs at least one prompt");
  std::vector<ChunkScore> scores(prompts.size());
  const auto& errors = options.error_tokens;
  parallel_for(
      prompts.size(), options.workers, options.execution_order,
      [&](std::size_t i) {
        auto [state, dist] = backend.prefill(prompts[i]);
        ChunkScore& s = scores[i];
        Sampler sampler(options.decoding, i);
        s.first_token = sampler(dist);
        s.entropy_bits = entropy_score(dist);
        s.is_idk = std::find(errors.begin(), errors.end(), dist.argmax()) != errors.end();
        s.state = std::move(state);
        s.first_dist = std::move(dist);
      },
      "prefill chunk");
  return scores;
}

double query_log_likelihood(const Backend& backend, std::span<const TokenId> prefix, std::span<const TokenId> chunk,
                            std::span<const TokenId> suffix, std::size_t query_begin, std::size_t query_end) {
  if (query_begin >= query_end) throw UsageError("empty query");
  if (query_end > suffix.size()) throw UsageError("query span lies outside the suffix");
  std::vector<TokenId> conditioning(prefix.begin(), prefix.end());
  conditioning.insert(conditioning.end(), chunk.begin(), chunk.end());
  conditioning.insert(conditioning.end(), suffix.begin(), suffix.begin() + static_cast<std::ptrdiff_t>(query_begin));
  if (conditioning.empty()) throw UsageError("query likelihood needs a nonempty conditioning prompt");

  auto [state, dist] = backend.prefill(conditioning);
  double loglik = 0.0;
  for (std::size_t k = query_begin; k < query_end; ++k) {
    const double p = dist[suffix[k]];
    if (p <= 0.0) return -std::numeric_limits<double>::infinity();
    loglik += std::log2(p);
    if (k + 1 < query_end) dist = backend.step(*state, suffix[k]);
  }
  return loglik;
}

std::vector<std::size_t> idk_filter(std::span<const bool> is_idk) {
  if (is_idk.empty()) throw UsageError("idk filter needs at least one chunk");
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < is_idk.size(); ++i)
    if (!is_idk[i]) kept.push_back(i);
  if (kept.empty()) kept.push_back(0);
  return kept;
}

std::vector<std::size_t> idk_filter(std::span<const ChunkScore> scores) {
  auto flags = std::make_unique<bool[]>(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) flags[i] = scores[i].is_idk;
  return idk_filter(std::span<const bool>(flags.get(), scores.size()));
}

namespace {

void check_kept(std::span<const ChunkScore> scores, std::span<const std::size_t> kept) {
  if (kept.empty()) throw UsageError("no chunk left to select from");
  for (std::size_t i : kept)
    if (i >= scores.size()) throw UsageError("kept index out of range");
}

/// Higher is better; lowest index wins ties through stable ordering.
double merit(const ChunkScore& s, Criterion criterion) {
  switch (criterion) {
    case Criterion::min_entropy:
      return -s.entropy_bits;
    case Criterion::max_query_likelihood:
      if (!s.query_loglik) throw UsageError("likelihood criterion requires query log-likelihoods");
      return *s.query_loglik;
    default:
      return 0.0;
  }
}

std::size_t snap_to_kept(std::span<const std::size_t> kept, std::size_t target) {
  std::size_t best = kept.front();
  for (std::size_t i : kept) {
    const auto dist = [target](std::size_t j) { return j > target ? j - target : target - j; };
    if (dist(i) < dist(best) || (dist(i) == dist(best) && i < best)) best = i;
  }
  return best;
}

}  // namespace

std::size_t select_chunk(std::span<const ChunkScore> scores, std::span<const std::size_t> kept, Criterion criterion,
                         std::mt19937_64& rng, std::size_t fixed_index) {
  check_kept(scores, kept);
  switch (criterion) {
    case Criterion::random:
      return kept[std::uniform_int_distribution<std::size_t>(0, kept.size() - 1)(rng)];
    case Criterion::fixed_index:
      return snap_to_kept(kept, fixed_index);
    default: {
      std::size_t best = kept.front();
      double best_merit = merit(scores[best], criterion);
      for (std::size_t i : kept) {
        const double m = merit(scores[i], criterion);
        if (m > best_merit || (m == best_merit && i < best)) {
          best = i;
          best_merit = m;
        }
      }
      return best;
    }
  }
}

std::vector<std::size_t> rank_chunks(std::span<const ChunkScore> scores, std::span<const std::size_t> kept,
                                     Criterion criterion, std::mt19937_64& rng, std::size_t fixed_index) {
  check_kept(scores, kept);
  std::vector<std::size_t> order(kept.begin(), kept.end());
  std::sort(order.begin(), order.end());
  switch (criterion) {
    case Criterion::random:
      std::shuffle(order.begin(), order.end(), rng);
      break;
    case Criterion::fixed_index: {
      const std::size_t first = snap_to_kept(kept, fixed_index);
      std::stable_partition(order.begin(), order.end(), [first](std::size_t i) { return i == first; });
      break;
    }
    default: {
      std::vector<double> m(scores.size());
      for (std::size_t i : order) m[i] = merit(scores[i], criterion);
      std::stable_sort(order.begin(), order.end(), [&m](std::size_t a, std::size_t b) { return m[a] > m[b]; });
    }
  }
  return order;
}

}  // namespace oprm::engine
