#include <cstring>
#include <sstream>

#include "doctest.h"
#include "oprm/ar/train.hpp"
#include "oprm/core/checkpoint.hpp"
#include "oprm/errors.hpp"

using namespace oprm;
using namespace oprm::ar;

namespace {

TrainConfig smoke() {
  TrainConfig c;
  c.d = 8;
  c.d_state = 2;
  c.n_keys = 8;
  c.n_values = 8;
  c.context_len = 24;
  c.m_blend = {1, 2, 4};
  c.steps = 20;
  c.lr = 1e-2;
  c.seed = 5;
  return c;
}

std::string bytes(const Checkpoint& c) {
  std::ostringstream os;
  write_checkpoint(os, c);
  return os.str();
}

}  // namespace

TEST_CASE("checkpoint round trip and header checks") {
  ModelConfig mc{12, 8, 2, 4, 2};
  Checkpoint c{ModelParams::init(mc, 3), 3, 17, {{"n_keys", "4"}}};
  round_to_float(c.params);
  const std::string data = bytes(c);
  CHECK(data.substr(0, 8) == "OPRMCKP1");

  std::istringstream in(data);
  const Checkpoint back = read_checkpoint(in);
  CHECK(back.params.config() == mc);
  CHECK(max_abs_diff(back.params, c.params) == 0.0);
  CHECK(back.seed == 3);
  CHECK(back.step == 17);
  CHECK(back.extra.at("n_keys") == "4");
  std::uint32_t header_len = 0;
  std::memcpy(&header_len, data.data() + 8, 4);
  CHECK(data.size() == 8 + 4 + header_len + 4 * c.params.parameter_count());
  CHECK(data.substr(12, 17) == "format-version=1\n");

  std::string bad_magic = data;
  bad_magic[7] = '2';
  std::istringstream bm(bad_magic);
  CHECK_THROWS_AS(read_checkpoint(bm), UsageError);

  std::string bad_version = data;
  bad_version.replace(bad_version.find("format-version=1"), 16, "format-version=9");
  std::istringstream bv(bad_version);
  CHECK_THROWS_WITH_AS(read_checkpoint(bv), doctest::Contains("format-version"), UsageError);

  std::istringstream trunc(data.substr(0, data.size() - 3));
  CHECK_THROWS_AS(read_checkpoint(trunc), UsageError);
}

TEST_CASE("zero steps yields the initialization") {
  TrainConfig c = smoke();
  c.steps = 0;
  const auto r = train_controlled(c);
  ModelParams init = ModelParams::init(c.model_config(), c.seed);
  round_to_float(init);
  CHECK(max_abs_diff(r.final.params, init) == 0.0);
  CHECK(r.log.empty());
  CHECK(r.final.step == 0);
}

TEST_CASE("same seed gives bit-identical checkpoints") {
  std::vector<std::string> a, b;
  TrainConfig c = smoke();
  c.checkpoint_every = 8;
  train_controlled(c, {[&](const Checkpoint& k) { a.push_back(bytes(k)); }, {}});
  train_controlled(c, {[&](const Checkpoint& k) { b.push_back(bytes(k)); }, {}});
  CHECK(a.size() == 3);  // steps 8, 16 and the final 20
  CHECK(a == b);
  c.seed = 6;
  std::vector<std::string> other;
  train_controlled(c, {[&](const Checkpoint& k) { other.push_back(bytes(k)); }, {}});
  CHECK(other.back() != a.back());
}

TEST_CASE("smoke training lowers the loss on fixed data") {
  TrainConfig c = smoke();
  c.steps = 200;
  const auto r = train_controlled(c);
  REQUIRE(r.log.size() == 200);
  // Compare early and late windows; single batches are noisy.
  double early = 0, late = 0;
  for (int i = 0; i < 10; ++i) {
    early += r.log[i].loss;
    late += r.log[190 + i].loss;
  }
  CHECK(late < early);
}

TEST_CASE("divergence aborts with the step index") {
  TrainConfig c = smoke();
  c.lr = 1e308;
  c.weight_decay = 0.0;
  try {
    train_controlled(c);
    FAIL("expected divergence");
  } catch (const NumericError& e) {
    REQUIRE(e.step().has_value());
    CHECK(*e.step() >= 1);
    CHECK(*e.step() <= 3);
  }
}

TEST_CASE("train config validation and schedule") {
  TrainConfig c = smoke();
  c.m_blend = {};
  CHECK_THROWS_AS(c.validate(), UsageError);
  c = smoke();
  c.m_blend = {13};
  CHECK_THROWS_AS(c.validate(), UsageError);
  c = smoke();
  c.steps = 100;
  c.warmup_steps = 10;
  c.min_lr_ratio = 0.1;
  CHECK(c.lr_at(0) == doctest::Approx(c.lr / 10));
  CHECK(c.lr_at(10) == doctest::Approx(c.lr));
  CHECK(c.lr_at(99) == doctest::Approx(c.lr * 0.1).epsilon(0.01));
}

TEST_CASE("loss log format") {
  std::ostringstream os;
  write_loss_log(os, {{1, 2.5, 0.125, 0.001}});
  CHECK(os.str() == "step,loss,grad_norm,lr\n1,2.500000,0.125000,0.001000\n");
}
