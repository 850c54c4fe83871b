#include <cmath>
#include <random>

#include "doctest.h"
#include "oprm/core/block.hpp"
#include "oprm/errors.hpp"

using namespace oprm;

namespace {

/// d = 1, d_state = 1 block with A = -1, delta = softplus(0) = ln 2.
BlockParams scalar_block(double s_b, double s_c) {
  BlockParams p;
  p.norm_gain = RowVector::Ones(1);
  p.w_gate = Matrix::Zero(1, 1);
  p.w_in = Matrix::Identity(1, 1);
  p.conv = Matrix::Zero(1, 4);
  p.conv(0, 3) = 1.0;
  p.s_delta = Matrix::Zero(1, 1);
  p.delta_bias = RowVector::Zero(1);
  p.s_b = Matrix::Constant(1, 1, s_b);
  p.s_c = Matrix::Constant(1, 1, s_c);
  p.a_log = Matrix::Zero(1, 1);
  return p;
}

BlockParams random_block(int d, int n, std::uint64_t seed) {
  ModelConfig cfg{8, d, n, 4, 1};
  return ModelParams::init(cfg, seed).blocks[0];
}

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

}  // namespace

TEST_CASE("discretize identity step") {
  const double a[] = {-1.0};
  const double b[] = {3.0};
  const auto r = discretize(a, 0.0, b);
  CHECK(r.a_bar[0] == 1.0);
  CHECK(r.b_bar[0] == 0.0);
}

TEST_CASE("discretize halves at delta = ln 2") {
  const double a[] = {-1.0};
  const double b[] = {1.0};
  const auto r = discretize(a, std::log(2.0), b);
  CHECK(r.a_bar[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(r.b_bar[0] == doctest::Approx(std::log(2.0)).epsilon(1e-15));
}

TEST_CASE("discretize two state entries") {
  const double a[] = {-2.0, -4.0};
  const double b[] = {1.0, 1.0};
  const auto r = discretize(a, 0.5, b);
  CHECK(r.a_bar[0] == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
  CHECK(r.a_bar[1] == doctest::Approx(std::exp(-2.0)).epsilon(1e-15));
  CHECK(r.b_bar[0] == 0.5);
  CHECK(r.b_bar[1] == 0.5);
}

TEST_CASE("discretize rejects bad input") {
  const double a[] = {-1.0};
  const double b[] = {NAN};
  CHECK_THROWS_AS(discretize(a, 0.1, b), NumericError);
  const double ok[] = {1.0};
  CHECK_THROWS_AS(discretize(a, INFINITY, ok), NumericError);
  CHECK_THROWS_AS(discretize(a, -0.1, ok), UsageError);
}

TEST_CASE("s6 scan from zero state") {
  // x = 2: delta*B*x = ln2 * (2/(2 ln2)) * 2 = 2, C = 0.5 * 2 = 1.
  const BlockParams p = scalar_block(1.0 / (2.0 * std::log(2.0)), 0.5);
  Matrix h = Matrix::Zero(1, 1);
  const Matrix y = s6_scan(p, Matrix::Constant(1, 1, 2.0), h);
  CHECK(h(0, 0) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(y(0, 0) == doctest::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("s6 scan one recurrence step from h = 4") {
  // x = 1: a_bar = 0.5, delta*B*x = ln2 / ln2 = 1, C = 1.
  const BlockParams p = scalar_block(1.0 / std::log(2.0), 1.0);
  Matrix h = Matrix::Constant(1, 1, 4.0);
  const Matrix y = s6_scan(p, Matrix::Constant(1, 1, 1.0), h);
  CHECK(h(0, 0) == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(y(0, 0) == doctest::Approx(3.0).epsilon(1e-14));
}

TEST_CASE("s6 scan resumed from a split point equals one scan") {
  const BlockParams p = random_block(6, 3, 11);
  const Matrix x = random_matrix(20, 6, 5);
  for (int split : {1, 7, 19}) {
    Matrix h_full = Matrix::Zero(6, 3);
    const Matrix y_full = s6_scan(p, x, h_full);
    Matrix h = Matrix::Zero(6, 3);
    s6_scan(p, x.topRows(split), h);
    const Matrix y_tail = s6_scan(p, x.bottomRows(20 - split), h);
    CHECK((y_tail - y_full.bottomRows(20 - split)).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((h - h_full).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("s6 scan keeps a_bar inside (0, 1]") {
  const BlockParams p = random_block(5, 4, 2);
  Matrix h = Matrix::Zero(5, 4);
  S6Trace trace;
  s6_scan(p, random_matrix(30, 5, 9) * 10.0, h, &trace);
  for (const auto& a : trace.a_bar) {
    CHECK(a.maxCoeff() <= 1.0);
    CHECK(a.minCoeff() >= 0.0);
  }
}

TEST_CASE("s6 scan reports the overflowing step") {
  BlockParams p = random_block(2, 2, 3);
  Matrix x = random_matrix(5, 2, 4);
  x(3, 0) = INFINITY;
  Matrix h = Matrix::Zero(2, 2);
  try {
    s6_scan(p, x, h, nullptr, 100);
    FAIL("expected a numeric error");
  } catch (const NumericError& e) {
    REQUIRE(e.step().has_value());
    CHECK(*e.step() == 103);
  }
}

TEST_CASE("block with zero input passes the input through") {
  const BlockParams p = random_block(8, 2, 7);
  LayerState state{Matrix::Zero(8, 2), Matrix::Zero(3, 8)};
  const Matrix u = Matrix::Zero(5, 8);
  const Matrix out = mamba_block_forward(p, u, state);
  CHECK(out.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("block streamed token by token equals the whole-sequence block") {
  const BlockParams p = random_block(8, 3, 21);
  const Matrix u = random_matrix(17, 8, 22);
  LayerState whole{Matrix::Zero(8, 3), Matrix::Zero(3, 8)};
  const Matrix expected = mamba_block_forward(p, u, whole);
  LayerState streamed{Matrix::Zero(8, 3), Matrix::Zero(3, 8)};
  for (Eigen::Index t = 0; t < u.rows(); ++t) {
    const Matrix row = mamba_block_forward(p, u.middleRows(t, 1), streamed);
    CHECK((row - expected.middleRows(t, 1)).cwiseAbs().maxCoeff() <= 1e-10);
  }
  CHECK((streamed.ssm - whole.ssm).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK((streamed.conv - whole.conv).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("first token sees the kernel over zero history") {
  const BlockParams p = random_block(4, 2, 8);
  LayerState state{Matrix::Zero(4, 2), Matrix::Zero(3, 4)};
  BlockCache cache;
  mamba_block_forward(p, random_matrix(1, 4, 1), state, &cache);
  const RowVector pre = cache.p_ext.row(3);  // W_in z_1
  CHECK(cache.p_ext.topRows(3).cwiseAbs().maxCoeff() == 0.0);
  for (int c = 0; c < 4; ++c) CHECK(cache.x(0, c) == doctest::Approx(p.conv(c, 3) * pre[c]).epsilon(1e-14));
  // The carried history now ends with that input.
  CHECK(state.conv.row(2) == pre);
}
