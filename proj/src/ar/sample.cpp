#include "oprm/ar/sample.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <set>

#include "oprm/errors.hpp"

namespace oprm::ar {

namespace {

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

TokenId draw(const TokenRange& r, std::mt19937_64& rng) {
  return r.at(std::uniform_int_distribution<TokenId>(0, r.count - 1)(rng));
}

}  // namespace

std::vector<int> even_gaps(int pads, int m) {
  if (m <= 0 || pads < 0) throw UsageError("even_gaps: need m > 0 and pads >= 0");
  std::vector<int> gaps(m, pads / m);
  for (int i = 0; i < pads % m; ++i) ++gaps[i];
  return gaps;
}

ARSample layout_facts(std::vector<Fact> facts, int n, const Vocab& vocab, std::size_t query_fact) {
  if (facts.empty()) throw UsageError("a recall context needs at least one fact");
  if (query_fact >= facts.size()) throw UsageError("query fact index out of range");
  std::size_t used = 0;
  for (const auto& f : facts) used += f.key.size() + f.value.size();
  if (used > static_cast<std::size_t>(n)) throw UsageError("facts do not fit in the context length");

  ARSample s;
  s.m = static_cast<int>(facts.size());
  s.n = n;
  s.query_fact = query_fact;
  const auto gaps = even_gaps(n - static_cast<int>(used), s.m);
  s.layout.reserve(n);
  for (std::size_t i = 0; i < facts.size(); ++i) {
    s.fact_offsets.push_back(s.layout.size());
    s.layout.insert(s.layout.end(), facts[i].key.begin(), facts[i].key.end());
    s.layout.insert(s.layout.end(), facts[i].value.begin(), facts[i].value.end());
    s.layout.insert(s.layout.end(), gaps[i], vocab.pad_token);
  }
  s.facts = std::move(facts);
  return s;
}

ARSample gen_controlled_sample(int m, int n, const Vocab& vocab, std::uint64_t seed) {
  if (m <= 0) throw UsageError("M must be positive");
  if (2 * m > n) throw UsageError("2M exceeds the context length N");
  if (m > vocab.key_range.count) throw UsageError("M exceeds the number of distinct keys");
  auto rng = make_rng(seed, static_cast<std::uint64_t>(m));
  std::vector<TokenId> keys(vocab.key_range.count);
  std::iota(keys.begin(), keys.end(), vocab.key_range.first);
  std::shuffle(keys.begin(), keys.end(), rng);
  std::vector<Fact> facts(m);
  for (int i = 0; i < m; ++i) facts[i] = {{keys[i]}, {draw(vocab.value_range, rng)}};
  const auto q = std::uniform_int_distribution<int>(0, m - 1)(rng);
  return layout_facts(std::move(facts), n, vocab, static_cast<std::size_t>(q));
}

ARSample gen_zero_shot_sample(int m, int n, const Vocab& vocab, std::uint64_t seed) {
  if (m <= 0) throw UsageError("M must be positive");
  if (m * (kZeroShotKeyLen + kZeroShotValueLen) > n) throw UsageError("facts overflow the context length N");
  double distinct_keys = 1.0;
  for (int i = 0; i < kZeroShotKeyLen; ++i) distinct_keys *= vocab.key_range.count;
  if (m > distinct_keys) throw UsageError("M exceeds the number of distinct keys");
  auto rng = make_rng(seed, static_cast<std::uint64_t>(m) | (1ULL << 40));
  std::set<std::vector<TokenId>> seen;
  std::vector<Fact> facts;
  facts.reserve(m);
  while (static_cast<int>(facts.size()) < m) {
    Fact f;
    for (int i = 0; i < kZeroShotKeyLen; ++i) f.key.push_back(draw(vocab.key_range, rng));
    if (!seen.insert(f.key).second) continue;
    for (int i = 0; i < kZeroShotValueLen; ++i) f.value.push_back(draw(vocab.value_range, rng));
    facts.push_back(std::move(f));
  }
  const auto q = std::uniform_int_distribution<int>(0, m - 1)(rng);
  return layout_facts(std::move(facts), n, vocab, static_cast<std::size_t>(q));
}

std::vector<TokenId> query_suffix(const Vocab& vocab, const std::vector<TokenId>& key) {
  std::vector<TokenId> s{vocab.query_marker};
  s.insert(s.end(), key.begin(), key.end());
  return s;
}

std::vector<TokenId> instructed_suffix(const Vocab& vocab, const std::vector<TokenId>& key) {
  std::vector<TokenId> s{vocab.idk_instruction};
  const auto q = query_suffix(vocab, key);
  s.insert(s.end(), q.begin(), q.end());
  return s;
}

namespace {

void add_value_branches(TrainingExample& ex, std::vector<TokenId> suffix, const std::vector<TokenId>& value) {
  for (TokenId v : value) {
    ex.branches.push_back({suffix, v});
    suffix.push_back(v);
  }
}

// Single-token keys absent from `facts`, distinct, in random order.
std::vector<TokenId> absent_keys(const std::vector<Fact>& facts, const Vocab& vocab, int count,
                                 std::mt19937_64& rng) {
  std::set<TokenId> used;
  for (const auto& f : facts) used.insert(f.key.front());
  std::vector<TokenId> pool;
  for (TokenId k = vocab.key_range.first; k < vocab.key_range.end(); ++k)
    if (!used.contains(k)) pool.push_back(k);
  std::shuffle(pool.begin(), pool.end(), rng);
  pool.resize(std::min<std::size_t>(pool.size(), static_cast<std::size_t>(count)));
  return pool;
}

}  // namespace

std::vector<TrainingExample> make_training_batch(std::span<const int> m_blend, int n, const Vocab& vocab,
                                                 std::uint64_t seed, int idk_queries) {
  if (m_blend.empty()) throw UsageError("empty information-density blend");
  if (idk_queries < 0) throw UsageError("idk_queries must be >= 0");
  std::vector<TrainingExample> batch;
  batch.reserve(m_blend.size() + 1);
  for (std::size_t i = 0; i < m_blend.size(); ++i) {
    const std::uint64_t ctx_seed = seed * 0x9E3779B97F4A7C15ULL + i;
    const ARSample s = gen_controlled_sample(m_blend[i], n, vocab, ctx_seed);
    std::vector<std::size_t> queried(s.facts.size());
    std::iota(queried.begin(), queried.end(), 0);
    if (static_cast<int>(queried.size()) > kMaxQueriesPerContext) {
      auto rng = make_rng(ctx_seed, 0xC0FFEE);
      std::shuffle(queried.begin(), queried.end(), rng);
      queried.resize(kMaxQueriesPerContext);
      std::sort(queried.begin(), queried.end());
    }
    TrainingExample ex;
    ex.tokens = s.layout;
    for (std::size_t f : queried) add_value_branches(ex, query_suffix(vocab, s.facts[f].key), s.facts[f].value);
    if (idk_queries > 0) {
      auto rng = make_rng(ctx_seed, 0x1D4);
      std::vector<std::size_t> present(s.facts.size());
      std::iota(present.begin(), present.end(), 0);
      std::shuffle(present.begin(), present.end(), rng);
      present.resize(std::min<std::size_t>(present.size(), static_cast<std::size_t>(idk_queries)));
      for (std::size_t f : present) add_value_branches(ex, instructed_suffix(vocab, s.facts[f].key), s.facts[f].value);
      for (TokenId k : absent_keys(s.facts, vocab, idk_queries, rng))
        ex.branches.push_back({instructed_suffix(vocab, {k}), vocab.error_token});
    }
    batch.push_back(std::move(ex));
  }
  if (idk_queries > 0) {
    auto rng = make_rng(seed, 0x9AD);
    TrainingExample ex;
    ex.tokens.assign(static_cast<std::size_t>(std::uniform_int_distribution<int>(1, n)(rng)), vocab.pad_token);
    for (TokenId k : absent_keys({}, vocab, idk_queries, rng))
      ex.branches.push_back({instructed_suffix(vocab, {k}), vocab.error_token});
    batch.push_back(std::move(ex));
  }
  return batch;
}

}  // namespace oprm::ar
