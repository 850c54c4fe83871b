#include <cmath>
#include <limits>
#include <random>

#include "doctest.h"
#include "oprm/engine/selection.hpp"
#include "oprm/errors.hpp"
#include "scripted_backend.hpp"

using namespace oprm;
using namespace oprm::engine;
using oprm::testing::ScriptedBackend;

namespace {

std::vector<ChunkScore> with_entropies(std::initializer_list<double> e) {
  std::vector<ChunkScore> s;
  for (double v : e) {
    ChunkScore c;
    c.entropy_bits = v;
    s.push_back(std::move(c));
  }
  return s;
}

std::vector<std::size_t> all_of(std::size_t n) {
  std::vector<std::size_t> k(n);
  for (std::size_t i = 0; i < n; ++i) k[i] = i;
  return k;
}

}  // namespace

TEST_CASE("entropy of reference distributions") {
  CHECK(entropy_score(OutputDistribution({0.25, 0.25, 0.25, 0.25})) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(entropy_score(OutputDistribution({0.0, 1.0, 0.0})) == 0.0);
  CHECK(entropy_score(OutputDistribution({0.5, 0.5, 0.0, 0.0})) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("idk filter rule") {
  const bool some[] = {true, false, true};
  CHECK(idk_filter(some) == std::vector<std::size_t>{1});
  const bool all[] = {true, true, true};
  CHECK(idk_filter(all) == std::vector<std::size_t>{0});
  const bool none[] = {false, false};
  CHECK(idk_filter(none) == std::vector<std::size_t>{0, 1});
}

TEST_CASE("select_chunk examples") {
  std::mt19937_64 rng(0);
  const auto e = with_entropies({1.2, 0.3, 0.3});
  CHECK(select_chunk(e, all_of(3), Criterion::min_entropy, rng) == 1);

  const std::vector<std::size_t> only2{2};
  for (auto c : {Criterion::min_entropy, Criterion::random, Criterion::fixed_index})
    CHECK(select_chunk(e, only2, c, rng) == 2);

  auto l = with_entropies({0, 0, 0});
  l[0].query_loglik = -std::numeric_limits<double>::infinity();
  l[1].query_loglik = -3.0;
  l[2].query_loglik = -1.0;
  CHECK(select_chunk(l, all_of(3), Criterion::max_query_likelihood, rng) == 2);
  CHECK(select_chunk(l, only2, Criterion::max_query_likelihood, rng) == 2);
}

TEST_CASE("likelihood criterion without likelihoods is a usage error") {
  std::mt19937_64 rng(0);
  const auto e = with_entropies({1.0, 2.0});
  CHECK_THROWS_AS(select_chunk(e, all_of(2), Criterion::max_query_likelihood, rng), UsageError);
  CHECK_THROWS_AS(select_chunk(e, std::vector<std::size_t>{}, Criterion::min_entropy, rng), UsageError);
}

TEST_CASE("all minus-infinity likelihoods select the first kept chunk") {
  std::mt19937_64 rng(0);
  auto l = with_entropies({0, 0, 0});
  for (auto& s : l) s.query_loglik = -std::numeric_limits<double>::infinity();
  CHECK(select_chunk(l, std::vector<std::size_t>{1, 2}, Criterion::max_query_likelihood, rng) == 1);
}

TEST_CASE("random criterion is seeded and covers the kept set") {
  const auto e = with_entropies({0, 0, 0, 0, 0});
  const std::vector<std::size_t> kept{1, 3, 4};
  std::mt19937_64 a(42), b(42);
  std::vector<int> hits(5, 0);
  for (int i = 0; i < 3000; ++i) {
    const auto j = select_chunk(e, kept, Criterion::random, a);
    CHECK(j == select_chunk(e, kept, Criterion::random, b));
    ++hits[j];
  }
  CHECK(hits[0] == 0);
  CHECK(hits[2] == 0);
  for (std::size_t k : kept) CHECK(std::abs(hits[k] - 1000) < 150);
}

TEST_CASE("fixed index snaps to the nearest kept chunk") {
  std::mt19937_64 rng(0);
  const auto e = with_entropies({0, 0, 0, 0, 0, 0});
  const std::vector<std::size_t> kept{1, 4};
  CHECK(select_chunk(e, kept, Criterion::fixed_index, rng, 4) == 4);
  CHECK(select_chunk(e, kept, Criterion::fixed_index, rng, 0) == 1);
  CHECK(select_chunk(e, kept, Criterion::fixed_index, rng, 9) == 4);
  CHECK(select_chunk(e, kept, Criterion::fixed_index, rng, 2) == 1);
  CHECK(select_chunk(e, kept, Criterion::fixed_index, rng, 3) == 4);
}

TEST_CASE("rank_chunks orders by merit with stable ties") {
  std::mt19937_64 rng(0);
  const auto e = with_entropies({0.5, 0.1, 0.9, 0.1});
  CHECK(rank_chunks(e, all_of(4), Criterion::min_entropy, rng) == std::vector<std::size_t>{1, 3, 0, 2});
  CHECK(rank_chunks(e, std::vector<std::size_t>{2, 0}, Criterion::min_entropy, rng) ==
        std::vector<std::size_t>{0, 2});
}

TEST_CASE("query likelihood is accumulated in log2 space") {
  // After the conditioning prompt: p(q1) = 0.5; after q1: p(q2) = 0.25.
  const std::size_t vocab = 8;
  ScriptedBackend backend(vocab, [vocab](const std::vector<TokenId>& h) {
    std::vector<double> p(vocab, 0.0);
    if (h.back() == 6) {
      p[7] = 0.25;
      p[0] = 0.75;
    } else {
      p[6] = 0.5;
      p[0] = 0.5;
    }
    return p;
  });
  const std::vector<TokenId> chunk{1, 2}, suffix{3, 6, 7};
  CHECK(query_log_likelihood(backend, {}, chunk, suffix, 1, 3) == doctest::Approx(-3.0).epsilon(1e-12));
  // 5 never has probability: the product collapses to zero.
  const std::vector<TokenId> bad{3, 5, 7};
  CHECK(query_log_likelihood(backend, {}, chunk, bad, 1, 3) == -std::numeric_limits<double>::infinity());
  CHECK_THROWS_AS(query_log_likelihood(backend, {}, chunk, suffix, 2, 2), UsageError);
}

TEST_CASE("query likelihood of a certain query is zero") {
  const std::vector<TokenId> query{4, 5, 6};
  ScriptedBackend backend(8, [&](const std::vector<TokenId>& h) {
    // Always one-hot on the next query token.
    std::size_t done = 0;
    while (done < query.size() && h.size() > done && h[h.size() - 1 - done] != 9) ++done;
    return ScriptedBackend::one_hot(8, query[std::min(done, query.size() - 1)]);
  });
  const std::vector<TokenId> chunk{1}, suffix{9, 4, 5, 6};
  CHECK(query_log_likelihood(backend, {}, chunk, suffix, 1, 4) == 0.0);
}

TEST_CASE("speculative prefill scores each chunk from its own prompt") {
  // Chunk i is identified by its first token and gets distribution D_i.
  const std::vector<std::vector<double>> dists{
      {0.25, 0.25, 0.25, 0.25}, {1.0, 0.0, 0.0, 0.0}, {0.5, 0.0, 0.5, 0.0}, {0.1, 0.2, 0.3, 0.4}};
  ScriptedBackend backend(4, [&](const std::vector<TokenId>& h) { return dists[static_cast<std::size_t>(h.front())]; });
  const std::vector<std::vector<TokenId>> prompts{{0, 1}, {1, 1}, {2, 1}, {3, 1}};
  PrefillOptions opt;
  opt.error_tokens = {2};
  const auto scores = speculative_prefill(backend, prompts, opt);
  REQUIRE(scores.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(scores[i].entropy_bits == entropy_score(OutputDistribution(dists[i])));
    CHECK(scores[i].first_token == OutputDistribution(dists[i]).argmax());
  }
  CHECK_FALSE(scores[1].is_idk);
  CHECK(scores[2].is_idk == false);  // argmax of (0.5, 0, 0.5, 0) is token 0
  CHECK(scores[3].first_token == 3);
}

TEST_CASE("speculative prefill with one prompt equals a backend prefill") {
  ScriptedBackend backend(4, [](const std::vector<TokenId>& h) {
    std::vector<double> p(4, 0.1);
    p[static_cast<std::size_t>(h.size() % 4)] = 0.7;
    return p;
  });
  const std::vector<std::vector<TokenId>> prompts{{1, 2, 3}};
  const auto scores = speculative_prefill(backend, prompts, {});
  const auto direct = backend.prefill(prompts[0]);
  CHECK(scores[0].first_dist == direct.dist);
}

TEST_CASE("speculative prefill ignores worker count and execution order") {
  const std::size_t vocab = 16;
  ScriptedBackend backend(vocab, [vocab](const std::vector<TokenId>& h) {
    std::vector<double> p(vocab);
    double sum = 0.0;
    for (std::size_t v = 0; v < vocab; ++v) sum += (p[v] = 1.0 + static_cast<double>((h[0] * 7 + v * 3) % 11));
    for (auto& x : p) x /= sum;
    return p;
  });
  std::vector<std::vector<TokenId>> prompts;
  for (TokenId i = 0; i < 12; ++i) prompts.push_back({i, 3, 4});
  PrefillOptions base;
  base.decoding = {Decoding::Kind::temperature, 0.8, 99};
  const auto ref = speculative_prefill(backend, prompts, base);

  PrefillOptions shuffled = base;
  shuffled.workers = 4;
  shuffled.execution_order = {11, 3, 7, 0, 1, 10, 2, 9, 4, 8, 6, 5};
  const auto other = speculative_prefill(backend, prompts, shuffled);
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    CHECK(other[i].first_dist == ref[i].first_dist);
    CHECK(other[i].first_token == ref[i].first_token);
    CHECK(other[i].entropy_bits == ref[i].entropy_bits);
  }
}

TEST_CASE("speculative prefill failure names the chunk") {
  ScriptedBackend backend(4, [](const std::vector<TokenId>& h) {
    if (h.front() == 2) return std::vector<double>{0.5, 0.6, 0.0, 0.0};  // not normalized
    return ScriptedBackend::uniform(4);
  });
  const std::vector<std::vector<TokenId>> prompts{{0}, {1}, {2}, {3}};
  try {
    speculative_prefill(backend, prompts, {});
    FAIL("expected failure");
  } catch (const UsageError& e) {
    CHECK(std::string(e.what()).find("chunk 2") != std::string::npos);
  }
  CHECK_THROWS_AS(speculative_prefill(backend, std::vector<std::vector<TokenId>>{}, {}), UsageError);
}
