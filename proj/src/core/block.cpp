#include "oprm/core/block.hpp"

#include <cmath>

#include "oprm/errors.hpp"

namespace oprm {

namespace {

inline double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }
inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

Discretized discretize(std::span<const double> a_row, double delta, std::span<const double> b) {
  if (a_row.size() != b.size()) throw UsageError("discretize: A row and B differ in length");
  if (!std::isfinite(delta)) throw NumericError("discretize: non-finite delta");
  if (delta < 0.0) throw UsageError("discretize: delta must be nonnegative");
  Discretized out{Vector(a_row.size()), Vector(b.size())};
  for (std::size_t n = 0; n < a_row.size(); ++n) {
    if (!std::isfinite(a_row[n]) || !std::isfinite(b[n])) throw NumericError("discretize: non-finite input");
    out.a_bar[n] = std::exp(a_row[n] * delta);
    out.b_bar[n] = b[n] * delta;
  }
  return out;
}

Matrix s6_scan(const BlockParams& p, const Matrix& x, Matrix& state, S6Trace* trace, std::int64_t position) {
  const Eigen::Index len = x.rows();
  const Eigen::Index d = x.cols();
  const Matrix a = p.a();

  Matrix delta_pre = x * p.s_delta.transpose();
  delta_pre.rowwise() += p.delta_bias;
  const Matrix delta = delta_pre.unaryExpr([](double v) { return softplus(v); });
  const Matrix bm = x * p.s_b.transpose();
  const Matrix cm = x * p.s_c.transpose();

  if (trace) {
    trace->a_bar.resize(len);
    trace->states.resize(len + 1);
    trace->states[0] = state;
  }
  Matrix y(len, d);
  Matrix a_bar(a.rows(), a.cols());
  for (Eigen::Index t = 0; t < len; ++t) {
    const Eigen::ArrayXd dt = delta.row(t).transpose().array();
    a_bar = (a.array().colwise() * dt).exp().matrix();
    const Eigen::ArrayXd dx = dt * x.row(t).transpose().array();
    // h_t = a_bar * h_{t-1} + (delta x) B^T
    state.array() = a_bar.array() * state.array() + (dx.matrix() * bm.row(t)).array();
    y.row(t).noalias() = (state * cm.row(t).transpose()).transpose();
    if (!y.row(t).allFinite() || !state.allFinite()) throw NumericError("s6 scan overflow", position + t);
    if (trace) {
      trace->a_bar[t] = a_bar;
      trace->states[t + 1] = state;
    }
  }
  if (trace) {
    trace->delta_pre = std::move(delta_pre);
    trace->delta = delta;
    trace->b = bm;
    trace->c = cm;
  }
  return y;
}

Matrix mamba_block_forward(const BlockParams& p, const Matrix& u, LayerState& state, BlockCache* cache,
                           std::int64_t position) {
  const Eigen::Index len = u.rows();
  const Eigen::Index d = u.cols();
  const Eigen::Index hist = state.conv.rows();
  const Eigen::Index k = p.conv.cols();

  Vector inv_rms(len);
  for (Eigen::Index t = 0; t < len; ++t)
    inv_rms[t] = 1.0 / std::sqrt(u.row(t).squaredNorm() / static_cast<double>(d) + kRmsEps);
  Matrix z = (inv_rms.asDiagonal() * u).array().rowwise() * p.norm_gain.array();

  Matrix gate_pre = z * p.w_gate.transpose();
  Matrix gate = gate_pre.unaryExpr([](double v) { return v * sigmoid(v); });

  Matrix p_ext(hist + len, d);
  p_ext.topRows(hist) = state.conv;
  p_ext.bottomRows(len).noalias() = z * p.w_in.transpose();

  // Causal depthwise convolution; tap j of channel c sees p_ext[t + j].
  Matrix x = Matrix::Zero(len, d);
  for (Eigen::Index j = 0; j < k; ++j)
    x.array() += p_ext.middleRows(j, len).array().rowwise() * p.conv.col(j).transpose().array();

  S6Trace* trace = cache ? &cache->s6 : nullptr;
  Matrix y = s6_scan(p, x, state.ssm, trace, position);

  state.conv = p_ext.bottomRows(hist);
  Matrix out = u + (y.array() * gate.array()).matrix();

  if (cache) {
    cache->u = u;
    cache->inv_rms = std::move(inv_rms);
    cache->z = std::move(z);
    cache->gate_pre = std::move(gate_pre);
    cache->gate = std::move(gate);
    cache->p_ext = std::move(p_ext);
    cache->x = std::move(x);
    cache->y = std::move(y);
  }
  return out;
}

}  // namespace oprm
