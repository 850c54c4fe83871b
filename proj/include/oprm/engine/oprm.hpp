#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "oprm/engine/selection.hpp"

namespace oprm::engine {

struct GenerationConfig {
  int chunk_len = 1;
  Criterion criterion = Criterion::min_entropy;
  std::size_t fixed_index = 0;
  /// Seeds the random criterion.
  std::uint64_t selection_seed = 0;
  Decoding decoding;
  int max_new_tokens = 1;
  std::vector<TokenId> stop_tokens;
  TokenId pad_token = 0;

  bool idk_filter = false;
  std::vector<TokenId> error_tokens;
  /// Prepended to the suffix when the IDK filter is on.
  std::vector<TokenId> idk_instruction;
  /// Whether query likelihoods are scored with the augmented suffix.
  bool idk_suffix_in_likelihood = false;

  /// Separator between per-chunk answers in summ_generate.
  std::vector<TokenId> answer_separator;
  int workers = 1;

  /// Throws UsageError on invalid settings.
  void validate() const;
};

struct ChunkRecord {
  std::size_t index = 0;
  double entropy_bits = 0.0;
  std::optional<double> query_loglik;
  bool is_idk = false;
  TokenId first_token = 0;
  bool selected = false;
};

/// What the engine saw and chose, one record per chunk.
struct SelectionTrace {
  std::vector<ChunkRecord> chunks;
  std::vector<std::size_t> kept;
  std::vector<std::size_t> selected;
  int pad_count = 0;

  /// Header line then one comma-separated row per chunk; entropy with 6
  /// decimals, log-likelihood as "-inf" or "NA" when not computed.
  void write_csv(std::ostream& out) const;
};

struct GenerationResult {
  std::vector<TokenId> tokens;
  SelectionTrace trace;
};

/// Plain recurrent inference over P ++ C ++ S.
std::vector<TokenId> vanilla_generate(const Backend& backend, const PromptParts& parts, const GenerationConfig& config);

/// Chunked speculative prefill, IDK filter, selection, and decoding from the
/// selected chunk's state only.
GenerationResult oprm_generate(const Backend& backend, const PromptParts& parts, const GenerationConfig& config);

/// Decodes every kept chunk and concatenates the answers in chunk order.
GenerationResult summ_generate(const Backend& backend, const PromptParts& parts, const GenerationConfig& config);

/// Ranks the kept chunks, re-prefills P ++ (top-k chunks in original order) ++ S
/// and decodes. `top_k` larger than the kept set uses every kept chunk.
GenerationResult cc_generate(const Backend& backend, const PromptParts& parts, std::size_t top_k,
                             const GenerationConfig& config);

}  // namespace oprm::engine
