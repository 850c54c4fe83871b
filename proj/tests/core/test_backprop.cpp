#include <random>

#include "doctest.h"
#include "oprm/core/backprop.hpp"
#include "oprm/core/optimizer.hpp"
#include "oprm/errors.hpp"

using namespace oprm;

namespace {

std::vector<TrainingExample> small_batch(int vocab, std::size_t len, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto tok = [&] { return static_cast<TokenId>(rng() % static_cast<std::uint64_t>(vocab)); };
  std::vector<TrainingExample> batch(2);
  for (auto& ex : batch) {
    for (std::size_t i = 0; i < len; ++i) ex.tokens.push_back(tok());
    ex.answers = {{len / 3, tok()}, {len - 1, tok()}};
    ex.branches = {{{tok(), tok()}, tok()}, {{tok()}, tok()}};
  }
  return batch;
}

/// Max over all scalars of |a - b| / max(|a|, |b|, floor).
double max_relative_error(const ModelParams& a, const ModelParams& b, double floor) {
  const auto ta = a.tensors();
  const auto tb = b.tensors();
  double worst = 0.0;
  for (std::size_t i = 0; i < ta.size(); ++i)
    for (std::size_t j = 0; j < ta[i].data.size(); ++j) {
      const double x = ta[i].data[j];
      const double y = tb[i].data[j];
      worst = std::max(worst, std::abs(x - y) / std::max({std::abs(x), std::abs(y), floor}));
    }
  return worst;
}

}  // namespace

TEST_CASE("analytic gradients match central differences") {
  const ModelParams p = ModelParams::init({16, 8, 2, 4, 2}, 17);
  const auto batch = small_batch(16, 24, 3);
  const auto analytic = loss_and_grads(batch, p);
  const auto numeric = finite_diff_grad(batch, p, 1e-3);
  CHECK(max_relative_error(analytic.grads, numeric, 1e-6) <= 1e-3);
  CHECK(analytic.loss == doctest::Approx(batch_loss(batch, p)).epsilon(1e-12));
}

TEST_CASE("central difference is exact for a quadratic") {
  const double g = central_difference([](double x) { return x * x; }, 3.0, 1e-3);
  CHECK(std::abs(g - 6.0) <= 1e-6);
  CHECK_THROWS_AS(central_difference([](double x) { return x; }, 0.0, 0.0), UsageError);
}

TEST_CASE("unused token embedding gets zero gradient") {
  const ModelParams p = ModelParams::init({16, 6, 2, 4, 2}, 5);
  std::vector<TrainingExample> batch(1);
  batch[0].tokens = {1, 2, 3, 4, 5, 1, 2};
  batch[0].answers = {{6, 9}};
  const auto analytic = loss_and_grads(batch, p);
  const auto numeric = finite_diff_grad(batch, p, 1e-3);
  CHECK(analytic.grads.embed.row(12).cwiseAbs().maxCoeff() == 0.0);
  CHECK(numeric.embed.row(12).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("loss vanishes when the head is forced onto the gold token") {
  ModelParams p = ModelParams::init({8, 4, 2, 4, 2}, 1);
  // Constant residual stream: identical embeddings and silent blocks.
  for (Eigen::Index r = 0; r < p.embed.rows(); ++r) p.embed.row(r) = p.embed.row(0);
  for (auto& b : p.blocks) b.w_gate.setZero();
  const RowVector e = p.embed.row(0);
  const RowVector z = e / std::sqrt(e.squaredNorm() / 4.0 + kRmsEps);
  p.head.setZero();
  p.head.col(5) = z.transpose() * 100.0;
  std::vector<TrainingExample> batch(1);
  batch[0].tokens = {1, 2, 3};
  batch[0].answers = {{0, 5}, {2, 5}};
  batch[0].branches = {{{4}, 5}};
  CHECK(loss_and_grads(batch, p).loss < 1e-9);
}

TEST_CASE("duplicating the batch leaves mean loss and gradients unchanged") {
  const ModelParams p = ModelParams::init({16, 8, 2, 4, 2}, 2);
  auto batch = small_batch(16, 12, 9);
  const auto single = loss_and_grads(batch, p);
  auto doubled = batch;
  doubled.insert(doubled.end(), batch.begin(), batch.end());
  const auto twice = loss_and_grads(doubled, p);
  CHECK(twice.loss == doctest::Approx(single.loss).epsilon(1e-12));
  CHECK(max_abs_diff(single.grads, twice.grads) <= 1e-12);
}

TEST_CASE("answer positions must be inside the sequence") {
  const ModelParams p = ModelParams::init({8, 4, 2, 4, 2}, 1);
  std::vector<TrainingExample> batch(1);
  batch[0].tokens = {1, 2};
  batch[0].answers = {{2, 3}};
  CHECK_THROWS_AS(loss_and_grads(batch, p), UsageError);
  batch[0].answers.clear();
  CHECK_THROWS_AS(loss_and_grads(batch, p), UsageError);
}

TEST_CASE("zero gradients leave parameters unchanged without decay") {
  const ModelConfig cfg{8, 4, 2, 4, 2};
  ModelParams p = ModelParams::init(cfg, 3);
  const ModelParams before = p;
  auto opt = OptimizerState::zeros(cfg);
  apply_update(p, ModelParams::zeros(cfg), opt, {1e-3, 0.0});
  CHECK(max_abs_diff(p, before) == 0.0);
  CHECK(opt.step == 1);
}

TEST_CASE("decoupled weight decay scales parameters") {
  const ModelConfig cfg{8, 4, 2, 4, 2};
  ModelParams p = ModelParams::init(cfg, 3);
  ModelParams expected = p;
  expected *= 1.0 - 1e-4;
  auto opt = OptimizerState::zeros(cfg);
  apply_update(p, ModelParams::zeros(cfg), opt, {1e-3, 0.1});
  CHECK(max_abs_diff(p, expected) <= 1e-15);
}

TEST_CASE("optimizer rejects mismatched shapes") {
  ModelParams p = ModelParams::init({8, 4, 2, 4, 2}, 3);
  auto opt = OptimizerState::zeros({8, 4, 2, 4, 2});
  CHECK_THROWS_AS(apply_update(p, ModelParams::zeros({8, 6, 2, 4, 2}), opt, {}), UsageError);
}

TEST_CASE("200 updates on a fixed batch lower the loss") {
  const ModelConfig cfg{16, 8, 2, 4, 2};
  ModelParams p = ModelParams::init(cfg, 6);
  auto opt = OptimizerState::zeros(cfg);
  const auto batch = small_batch(16, 16, 4);
  const double initial = batch_loss(batch, p);
  for (int i = 0; i < 200; ++i) apply_update(p, loss_and_grads(batch, p).grads, opt, {1e-2, 0.1});
  CHECK(batch_loss(batch, p) < initial);
}
