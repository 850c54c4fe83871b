#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"
#include "oprm/ar/eval.hpp"
#include "oprm/errors.hpp"
#include "scripted_backend.hpp"

using namespace oprm;
using namespace oprm::ar;
using oprm::testing::recall_oracle;
using oprm::testing::ScriptedBackend;

namespace {

const Vocab kVocab = Vocab::controlled(64, 64);

engine::GenerationConfig gen_config(int chunk_len) {
  engine::GenerationConfig c;
  c.chunk_len = chunk_len;
  c.pad_token = kVocab.pad_token;
  return c;
}

EvalConfig small_eval() {
  EvalConfig c;
  c.grid = {1, 2, 4, 8, 16, 32};
  c.contexts_per_m = 5;
  c.seeds = {0, 1};
  return c;
}

/// Answers a random value token, seeded from the prompt so calls are pure.
GenerateFn random_answer(int alphabet) {
  return [alphabet](const engine::PromptParts& p, int) {
    std::uint64_t h = 0;
    for (TokenId t : p.context) h = h * 1000003 + static_cast<std::uint64_t>(t);
    for (TokenId t : p.suffix) h = h * 1000003 + static_cast<std::uint64_t>(t);
    std::mt19937_64 rng(h);
    return std::vector<TokenId>{kVocab.value_range.at(std::uniform_int_distribution<int>(0, alphabet - 1)(rng))};
  };
}

}  // namespace

TEST_CASE("perfect oracle scores 1.0 everywhere, vanilla and chunked") {
  ScriptedBackend backend(kVocab.size, recall_oracle(kVocab.size, kVocab.query_marker));
  const auto base = eval_ar_curve(vanilla_fn(backend, gen_config(1)), kVocab, small_eval());
  const auto chunked = eval_ar_curve(oprm_fn(backend, gen_config(12)), kVocab, small_eval());
  CHECK(base.curve.grid == chunked.curve.grid);
  for (double a : base.curve.accuracy) CHECK(a == 1.0);
  for (double a : chunked.curve.accuracy) CHECK(a == 1.0);
  CHECK(base.curve.queries == std::vector<int>{10, 20, 40, 80, 160, 320});
}

TEST_CASE("uniform random answers score about 1/W") {
  EvalConfig c = small_eval();
  c.grid = {16};
  c.contexts_per_m = 200;
  c.seeds = {3};
  for (int w : {2, 8, 64}) {
    // A random guess over W values only hits when the gold lies in that subset.
    const auto r = eval_ar_curve(random_answer(w), kVocab, c);
    const double p = (1.0 / w) * (static_cast<double>(w) / 64.0);
    const double n = r.curve.queries[0];
    const double sigma = std::sqrt(p * (1 - p) / n);
    CHECK(std::abs(r.curve.accuracy[0] - p) <= 3 * sigma + 1e-12);
  }
}

TEST_CASE("evaluation is pure and independent of the worker count") {
  const auto fn = random_answer(4);
  EvalConfig c = small_eval();
  const auto a = eval_ar_curve(fn, kVocab, c);
  c.workers = 3;
  const auto b = eval_ar_curve(fn, kVocab, c);
  CHECK(a.curve.accuracy == b.curve.accuracy);
  CHECK(a.outcomes.size() == b.outcomes.size());
  for (std::size_t i = 0; i < a.outcomes.size(); ++i) CHECK(a.outcomes[i].correct == b.outcomes[i].correct);
}

TEST_CASE("query subset caps scored queries per context") {
  EvalConfig c = small_eval();
  c.max_queries = 3;
  const auto r = eval_ar_curve(random_answer(4), kVocab, c);
  CHECK(r.curve.queries == std::vector<int>{10, 20, 30, 30, 30, 30});
}

TEST_CASE("evaluation config is validated") {
  EvalConfig c = small_eval();
  c.grid = {4, 2};
  CHECK_THROWS_AS(eval_ar_curve(random_answer(2), kVocab, c), UsageError);
  c.grid = {};
  CHECK_THROWS_AS(eval_ar_curve(random_answer(2), kVocab, c), UsageError);
  c.grid = {64};
  CHECK_THROWS_AS(eval_ar_curve(random_answer(2), kVocab, c), UsageError);
}

TEST_CASE("capacity report examples") {
  ARCurve perfect{{1, 2, 4, 8}, {1, 1, 1, 1}, {}, 1, {}};
  CHECK(capacity_report(perfect, 8).ratio == 1.0);

  ARCurve c{{8, 16, 32}, {1.0, 0.5, 0.2}, {}, 1, {}};
  const auto r = capacity_report(c, 32, 64, 4);
  CHECK(r.capacity == doctest::Approx(8.0));
  CHECK(r.ratio == doctest::Approx(0.25));
  CHECK(r.d == 64);

  ARCurve zero{{1, 2}, {0, 0}, {}, 1, {}};
  CHECK(capacity_report(zero, 2).ratio == 0.0);

  ARCurve t{{1, 2, 4, 8}, {1.0, 0.95, 0.85, 0.91}, {}, 1, {}};
  CHECK(capacity_report(t, 8, 0, 0, CapacityMode::threshold).capacity == 8.0);
  t.accuracy[3] = 0.5;
  CHECK(capacity_report(t, 8, 0, 0, CapacityMode::threshold).capacity == 2.0);
}

TEST_CASE("capacity matches a brute-force scan") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 200; ++trial) {
    ARCurve c;
    for (int m = 1; m <= 64; m *= 2) {
      c.grid.push_back(m);
      c.accuracy.push_back(u(rng));
    }
    double best = 0.0;
    for (std::size_t i = 0; i < c.grid.size(); ++i) best = std::max(best, c.grid[i] * c.accuracy[i]);
    CHECK(capacity_report(c, 32).capacity == best);
  }
}

TEST_CASE("positional histogram") {
  std::vector<QueryOutcome> uniform;
  for (int i = 0; i < 1000; ++i) uniform.push_back({10, 0, i / 1000.0, true});
  const auto h = positional_histogram(uniform);
  REQUIRE(h.bins.size() == 10);
  for (double b : h.bins) CHECK(b == doctest::Approx(0.1));

  std::vector<QueryOutcome> first{{4, 0, 0.0, true}, {4, 0, 0.0, true}, {4, 2, 0.5, false}};
  const auto f = positional_histogram(first);
  CHECK(f.bins[0] == 1.0);
  CHECK(f.successes == 2);

  const auto none = positional_histogram({{4, 1, 0.3, false}});
  CHECK(none.empty);
  CHECK(none.successes == 0);

  std::ostringstream os;
  write_histogram_csv(os, f);
  CHECK(os.str().rfind("bin,lo,hi,fraction\n0,0.000000,0.100000,1.000000\n", 0) == 0);
}

TEST_CASE("length sweep varies padding only") {
  ScriptedBackend backend(kVocab.size, recall_oracle(kVocab.size, kVocab.query_marker));
  EvalConfig c = small_eval();
  c.grid = {1, 4, 16};
  const auto curves = length_sensitivity_sweep(vanilla_fn(backend, gen_config(1)), kVocab, c, {32, 96, 384});
  REQUIRE(curves.size() == 3);
  for (const auto& cv : curves) CHECK(cv.accuracy == curves[0].accuracy);

  // Facts are shared across lengths; the minimal N has no pads.
  const auto r1 = length_sensitivity_sweep(random_answer(64), kVocab, c, {32, 32});
  CHECK(r1[0].accuracy == r1[1].accuracy);
  CHECK_THROWS_AS(length_sensitivity_sweep(random_answer(2), kVocab, c, {31}), UsageError);
}

TEST_CASE("curve and capacity tables") {
  std::ostringstream os;
  write_curves_csv(os, {{"baseline", ARCurve{{1, 2}, {1.0, 0.5}, {4, 8}, 2, {0}}}});
  CHECK(os.str() == "label,M,accuracy,queries\nbaseline,1,1.000000,4\nbaseline,2,0.500000,8\n");
  std::ostringstream cs;
  write_capacity_csv(cs, {{64, 4, 32, 8.0, 0.25}});
  CHECK(cs.str() == "d,d_state,M_trained,capacity,ratio\n64,4,32,8.000000,0.250000\n");
}
