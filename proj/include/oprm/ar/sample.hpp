#pragma once

#include <cstdint>
#include <vector>

#include "oprm/core/backprop.hpp"
#include "oprm/core/vocab.hpp"

namespace oprm::ar {

struct Fact {
  std::vector<TokenId> key;
  std::vector<TokenId> value;

  bool operator==(const Fact&) const = default;
};

/// One associative-recall context: M facts laid out over exactly N tokens
/// with evenly spaced pad runs after each fact.
struct ARSample {
  int m = 0;
  int n = 0;
  std::vector<Fact> facts;
  std::vector<TokenId> layout;
  std::vector<std::size_t> fact_offsets;  // start of each fact inside `layout`
  std::size_t query_fact = 0;

  const std::vector<TokenId>& query() const { return facts[query_fact].key; }
  const std::vector<TokenId>& gold() const { return facts[query_fact].value; }

  bool operator==(const ARSample&) const = default;
};

/// Pad run lengths for `m` gaps holding `pads` tokens: floor division with
/// the remainder assigned to the earliest gaps.
std::vector<int> even_gaps(int pads, int m);

/// Lays `facts` out over `n` tokens. Throws UsageError when they do not fit.
ARSample layout_facts(std::vector<Fact> facts, int n, const Vocab& vocab, std::size_t query_fact = 0);

/// Single-token keys and values; requires 2M <= N and M <= |key range|.
ARSample gen_controlled_sample(int m, int n, const Vocab& vocab, std::uint64_t seed);

/// Three-token keys from the key alphabet, five-token values from the value
/// alphabet; keys are distinct (rejection sampled).
ARSample gen_zero_shot_sample(int m, int n, const Vocab& vocab, std::uint64_t seed);

inline constexpr int kZeroShotKeyLen = 3;
inline constexpr int kZeroShotValueLen = 5;

/// Suffix placed after the context to ask for `key`: query marker then key.
std::vector<TokenId> query_suffix(const Vocab& vocab, const std::vector<TokenId>& key);

/// Training examples for one context per entry of `m_blend`. Every context
/// gets one query branch per fact, capped at 16 randomly chosen facts when
/// M > 16. Multi-token values are teacher forced, one branch per value token.
///
/// With `idk_queries` > 0 each context also gets that many instructed queries
/// (suffix led by the IDK instruction) for present keys, answered with their
/// value, and as many for absent keys, answered with the error token. One
/// extra all-pad context of random length carries only absent-key queries.
std::vector<TrainingExample> make_training_batch(std::span<const int> m_blend, int n, const Vocab& vocab,
                                                 std::uint64_t seed, int idk_queries = 0);

/// Suffix asking for `key` under the IDK instruction.
std::vector<TokenId> instructed_suffix(const Vocab& vocab, const std::vector<TokenId>& key);

inline constexpr int kMaxQueriesPerContext = 16;

}  // namespace oprm::ar
