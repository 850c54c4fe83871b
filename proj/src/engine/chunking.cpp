#include "oprm/engine/chunking.hpp"

#include "oprm/errors.hpp"

namespace oprm::engine {

void PromptParts::validate() const {
  if (query_begin > query_end || query_end > suffix.size()) throw UsageError("query span lies outside the suffix");
}

std::vector<TokenId> PromptParts::joined() const {
  std::vector<TokenId> out(prefix);
  out.insert(out.end(), context.begin(), context.end());
  out.insert(out.end(), suffix.begin(), suffix.end());
  return out;
}

std::vector<TokenId> ChunkSet::reconstruct() const {
  std::vector<TokenId> out;
  for (const auto& c : chunks) out.insert(out.end(), c.begin(), c.end());
  out.resize(out.size() - static_cast<std::size_t>(pad_count));
  return out;
}

ChunkSet make_chunks(std::span<const TokenId> context, int chunk_len, TokenId pad_token) {
  if (chunk_len < 1) throw UsageError("chunk length must be at least 1");
  if (context.empty()) throw UsageError("cannot chunk an empty context");
  const auto len = static_cast<std::size_t>(chunk_len);
  ChunkSet set;
  set.chunk_len = chunk_len;
  set.pad_count = static_cast<int>((len - context.size() % len) % len);
  for (std::size_t begin = 0; begin < context.size(); begin += len) {
    const std::size_t end = std::min(begin + len, context.size());
    std::vector<TokenId> chunk(context.begin() + static_cast<std::ptrdiff_t>(begin),
                               context.begin() + static_cast<std::ptrdiff_t>(end));
    chunk.resize(len, pad_token);
    set.chunks.push_back(std::move(chunk));
  }
  return set;
}

std::vector<std::vector<TokenId>> build_prompts(std::span<const TokenId> prefix, const ChunkSet& chunks,
                                                std::span<const TokenId> suffix) {
  std::vector<std::vector<TokenId>> prompts;
  prompts.reserve(chunks.count());
  for (const auto& c : chunks.chunks) {
    std::vector<TokenId> x(prefix.begin(), prefix.end());
    x.insert(x.end(), c.begin(), c.end());
    x.insert(x.end(), suffix.begin(), suffix.end());
    prompts.push_back(std::move(x));
  }
  return prompts;
}

}  // namespace oprm::engine
