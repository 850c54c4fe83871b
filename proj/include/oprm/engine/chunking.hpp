#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "oprm/core/vocab.hpp"

namespace oprm::engine {

/// A prompt X = [P, C, S]; `query_begin..query_end` locates the query inside S.
struct PromptParts {
  std::vector<TokenId> prefix;
  std::vector<TokenId> context;
  std::vector<TokenId> suffix;
  std::size_t query_begin = 0;
  std::size_t query_end = 0;

  /// Throws UsageError when the query span does not lie inside the suffix.
  void validate() const;
  std::vector<TokenId> joined() const;
};

/// The context split into equal-length chunks after right padding.
struct ChunkSet {
  int chunk_len = 0;
  int pad_count = 0;
  std::vector<std::vector<TokenId>> chunks;

  std::size_t count() const { return chunks.size(); }
  /// Concatenation of the chunks with the trailing padding removed.
  std::vector<TokenId> reconstruct() const;
};

/// Right-pads `context` with `pad_token` to a multiple of `chunk_len` and
/// splits it. Throws UsageError for an empty context or chunk_len < 1.
ChunkSet make_chunks(std::span<const TokenId> context, int chunk_len, TokenId pad_token);

/// X_i = P ++ C_i ++ S for every chunk.
std::vector<std::vector<TokenId>> build_prompts(std::span<const TokenId> prefix, const ChunkSet& chunks,
                                                std::span<const TokenId> suffix);

}  // namespace oprm::engine
