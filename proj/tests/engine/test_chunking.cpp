#include <random>

#include "doctest.h"
#include "oprm/engine/chunking.hpp"
#include "oprm/errors.hpp"

using namespace oprm;
using namespace oprm::engine;

namespace {

std::vector<TokenId> iota_tokens(int n) {
  std::vector<TokenId> c(n);
  for (int i = 0; i < n; ++i) c[i] = 10 + i;
  return c;
}

}  // namespace

TEST_CASE("make_chunks pads to a multiple of the chunk length") {
  struct Case {
    int len, chunk, pad, count;
  };
  for (const auto& c : {Case{10, 4, 2, 3}, Case{8, 4, 0, 2}, Case{5, 8, 3, 1}}) {
    const auto set = make_chunks(iota_tokens(c.len), c.chunk, 0);
    CHECK(set.pad_count == c.pad);
    CHECK(set.count() == static_cast<std::size_t>(c.count));
    for (const auto& chunk : set.chunks) CHECK(chunk.size() == static_cast<std::size_t>(c.chunk));
  }
  const auto set = make_chunks(iota_tokens(10), 4, 0);
  CHECK(set.chunks[2] == std::vector<TokenId>{18, 19, 0, 0});
}

TEST_CASE("make_chunks rejects empty context and bad length") {
  CHECK_THROWS_AS(make_chunks(std::vector<TokenId>{}, 4, 0), UsageError);
  CHECK_THROWS_AS(make_chunks(iota_tokens(3), 0, 0), UsageError);
}

TEST_CASE("chunk reconstruction round-trips random contexts") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 300; ++trial) {
    const int len = 1 + static_cast<int>(rng() % 200);
    const int chunk = 1 + static_cast<int>(rng() % 64);
    const auto context = iota_tokens(len);
    const auto set = make_chunks(context, chunk, 0);
    CHECK(set.reconstruct() == context);
    CHECK(set.count() * static_cast<std::size_t>(chunk) == context.size() + static_cast<std::size_t>(set.pad_count));
    CHECK(set.pad_count < chunk);
  }
}

TEST_CASE("build_prompts wraps each chunk with prefix and suffix") {
  const auto set = make_chunks(iota_tokens(10), 4, 0);
  SUBCASE("empty prefix and suffix") {
    const auto prompts = build_prompts({}, set, {});
    REQUIRE(prompts.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) CHECK(prompts[i] == set.chunks[i]);
  }
  SUBCASE("lengths") {
    const std::vector<TokenId> p{1, 2}, s{3, 4, 5};
    const auto prompts = build_prompts(p, set, s);
    for (const auto& x : prompts) {
      CHECK(x.size() == p.size() + 4 + s.size());
      CHECK(x.front() == 1);
      CHECK(x.back() == 5);
    }
  }
  SUBCASE("single chunk is the padded prompt") {
    const auto one = make_chunks(iota_tokens(5), 8, 0);
    const std::vector<TokenId> p{1}, s{2};
    const auto prompts = build_prompts(p, one, s);
    REQUIRE(prompts.size() == 1);
    CHECK(prompts[0] == std::vector<TokenId>{1, 10, 11, 12, 13, 14, 0, 0, 0, 2});
  }
}
