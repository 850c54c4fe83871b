#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "oprm/engine/backend.hpp"
#include "oprm/engine/chunking.hpp"
#include "oprm/engine/decoding.hpp"

namespace oprm::engine {

/// Speculative prefill products of one chunk prompt X_i.
struct ChunkScore {
  std::unique_ptr<SessionState> state;
  OutputDistribution first_dist;
  double entropy_bits = 0.0;
  /// log2 Pr(Q | P, C_i, S before Q); -inf when some query token has zero
  /// probability; empty when not computed.
  std::optional<double> query_loglik;
  TokenId first_token = 0;
  bool is_idk = false;
};

/// Shannon entropy in bits, with 0 log 0 = 0.
double entropy_score(const OutputDistribution& dist);

struct PrefillOptions {
  Decoding decoding;
  std::vector<TokenId> error_tokens;
  int workers = 1;
  /// Permutation of chunk indices to process in; empty means natural order.
  std::vector<std::size_t> execution_order;
};

/// Prefills every prompt independently from the zero state. Results are
/// indexed by chunk regardless of worker count or execution order.
std::vector<ChunkScore> speculative_prefill(const Backend& backend, std::span<const std::vector<TokenId>> prompts,
                                            const PrefillOptions& options);

/// Teacher-forced log2-likelihood of the query tokens given
/// P ++ chunk ++ S[0, query_begin). Accumulated in log space.
double query_log_likelihood(const Backend& backend, std::span<const TokenId> prefix, std::span<const TokenId> chunk,
                            std::span<const TokenId> suffix, std::size_t query_begin, std::size_t query_end);

/// Indices whose flag is false; {0} when every flag is set.
std::vector<std::size_t> idk_filter(std::span<const bool> is_idk);
std::vector<std::size_t> idk_filter(std::span<const ChunkScore> scores);

enum class Criterion { min_entropy, max_query_likelihood, random, fixed_index };

/// Picks the decoding chunk among `kept`. Ties go to the lowest index.
/// `fixed_index` snaps to the nearest kept index (lower on ties).
std::size_t select_chunk(std::span<const ChunkScore> scores, std::span<const std::size_t> kept, Criterion criterion,
                         std::mt19937_64& rng, std::size_t fixed_index = 0);

/// All of `kept`, best first under `criterion` (random shuffles).
std::vector<std::size_t> rank_chunks(std::span<const ChunkScore> scores, std::span<const std::size_t> kept,
                                     Criterion criterion, std::mt19937_64& rng, std::size_t fixed_index = 0);

}  // namespace oprm::engine
