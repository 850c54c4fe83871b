#include "oprm/core/backprop.hpp"

#include <cmath>

#include "oprm/errors.hpp"

namespace oprm {

namespace {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// d/du of z = u * inv_rms * gain for one row, given dz.
RowVector rms_norm_backward(const RowVector& u, double inv_rms, const RowVector& gain, const RowVector& dz,
                            RowVector& d_gain) {
  d_gain += dz.cwiseProduct(u) * inv_rms;
  const RowVector a = dz.cwiseProduct(gain);
  const double dot = a.dot(u);
  const double n = static_cast<double>(u.size());
  return a * inv_rms - u * (inv_rms * inv_rms * inv_rms * dot / n);
}

std::vector<LayerStateGrad> zero_state_grads(const ModelConfig& cfg) {
  return std::vector<LayerStateGrad>(
      cfg.n_layers, LayerStateGrad{Matrix::Zero(cfg.d, cfg.d_state), Matrix::Zero(cfg.conv_width - 1, cfg.d)});
}

/// Loss of one answer row; adds the head/final-norm gradient and returns dL/d(residual).
RowVector head_backward(const ModelParams& params, const RowVector& residual, TokenId gold, double weight,
                        double& loss, ModelParams& grads) {
  const double inv_rms =
      1.0 / std::sqrt(residual.squaredNorm() / static_cast<double>(residual.size()) + kRmsEps);
  const RowVector z = (residual * inv_rms).cwiseProduct(params.final_norm);
  RowVector logits = z * params.head;
  const double mx = logits.maxCoeff();
  RowVector probs = (logits.array() - mx).exp().matrix();
  const double sum = probs.sum();
  probs /= sum;
  loss += weight * -(logits[gold] - mx - std::log(sum));
  RowVector d_logits = probs * weight;
  d_logits[gold] -= weight;
  grads.head.noalias() += z.transpose() * d_logits;
  const RowVector dz = d_logits * params.head.transpose();
  return rms_norm_backward(residual, inv_rms, params.final_norm, dz, grads.final_norm);
}

double answer_loss(const ModelParams& params, const RowVector& residual, TokenId gold) {
  const RowVector logits = head_logits(params, residual);
  const double mx = logits.maxCoeff();
  return -(logits[gold] - mx - std::log((logits.array() - mx).exp().sum()));
}

void backward_tokens(const ModelParams& params, const SequenceCache& cache, Matrix d_top,
                     std::vector<LayerStateGrad>& d_state, ModelParams& grads) {
  for (std::size_t l = params.blocks.size(); l-- > 0;)
    d_top = mamba_block_backward(params.blocks[l], cache.blocks[l], d_top, d_state[l], grads.blocks[l]);
  for (std::size_t t = 0; t < cache.tokens.size(); ++t)
    grads.embed.row(cache.tokens[t]) += d_top.row(static_cast<Eigen::Index>(t));
}

void check_example(const TrainingExample& ex) {
  for (const auto& a : ex.answers)
    if (a.position >= ex.tokens.size()) throw UsageError("answer position outside its sequence");
  for (const auto& b : ex.branches)
    if (b.suffix.empty()) throw UsageError("query branch with empty suffix");
  if (ex.tokens.empty() && !ex.answers.empty()) throw UsageError("answers on an empty sequence");
}

std::size_t total_answers(std::span<const TrainingExample> batch) {
  std::size_t n = 0;
  for (const auto& ex : batch) {
    check_example(ex);
    n += ex.answer_count();
  }
  if (n == 0) throw UsageError("batch has no answer positions");
  return n;
}

}  // namespace

Matrix mamba_block_backward(const BlockParams& p, const BlockCache& c, const Matrix& d_out, LayerStateGrad& d_state,
                            BlockParams& g) {
  const Eigen::Index len = d_out.rows();
  const Eigen::Index d = d_out.cols();
  const Eigen::Index hist = d_state.conv.rows();
  const Eigen::Index k = p.conv.cols();
  const Matrix a = p.a();
  const S6Trace& s6 = c.s6;

  Matrix d_u = d_out;  // residual path
  const Matrix d_y = (d_out.array() * c.gate.array()).matrix();
  const Matrix d_gate = (d_out.array() * c.y.array()).matrix();
  const Matrix d_gate_pre = d_gate.binaryExpr(c.gate_pre, [](double dg, double v) {
    const double s = sigmoid(v);
    return dg * s * (1.0 + v * (1.0 - s));
  });

  // Reverse scan.
  Matrix d_x = Matrix::Zero(len, d);
  Matrix d_delta = Matrix::Zero(len, d);
  Matrix d_b = Matrix::Zero(len, s6.b.cols());
  Matrix d_c = Matrix::Zero(len, s6.c.cols());
  Matrix d_a = Matrix::Zero(a.rows(), a.cols());
  Matrix dh = d_state.ssm;
  for (Eigen::Index t = len; t-- > 0;) {
    const Matrix& h = s6.states[t + 1];
    const Matrix& h_prev = s6.states[t];
    const Matrix& a_bar = s6.a_bar[t];
    dh.noalias() += d_y.row(t).transpose() * s6.c.row(t);
    d_c.row(t).noalias() = d_y.row(t) * h;
    const Eigen::ArrayXXd d_abar_scaled = dh.array() * h_prev.array() * a_bar.array();  // dL/d(A delta)
    d_delta.row(t) += (d_abar_scaled * a.array()).rowwise().sum().matrix().transpose();
    d_a.array() += d_abar_scaled.colwise() * s6.delta.row(t).transpose().array();
    const Vector dh_b = dh * s6.b.row(t).transpose();  // sum_n dh[c,n] B[t,n]
    d_delta.row(t) += (dh_b.array() * c.x.row(t).transpose().array()).matrix().transpose();
    d_x.row(t) += (dh_b.array() * s6.delta.row(t).transpose().array()).matrix().transpose();
    const RowVector dx_scaled = (s6.delta.row(t).array() * c.x.row(t).array()).matrix();
    d_b.row(t).noalias() = dx_scaled * dh;
    dh.array() *= a_bar.array();
  }
  d_state.ssm = dh;
  g.a_log.array() += d_a.array() * a.array();

  const Matrix d_delta_pre = d_delta.binaryExpr(s6.delta_pre, [](double dd, double v) { return dd * sigmoid(v); });
  g.s_delta.noalias() += d_delta_pre.transpose() * c.x;
  g.delta_bias += d_delta_pre.colwise().sum();
  d_x.noalias() += d_delta_pre * p.s_delta;
  g.s_b.noalias() += d_b.transpose() * c.x;
  d_x.noalias() += d_b * p.s_b;
  g.s_c.noalias() += d_c.transpose() * c.x;
  d_x.noalias() += d_c * p.s_c;

  // Convolution.
  Matrix d_p_ext = Matrix::Zero(hist + len, d);
  d_p_ext.bottomRows(hist) += d_state.conv;
  for (Eigen::Index j = 0; j < k; ++j) {
    d_p_ext.middleRows(j, len).array() += d_x.array().rowwise() * p.conv.col(j).transpose().array();
    g.conv.col(j) += (c.p_ext.middleRows(j, len).array() * d_x.array()).colwise().sum().transpose().matrix();
  }
  d_state.conv = d_p_ext.topRows(hist);
  const auto d_p = d_p_ext.bottomRows(len);

  g.w_in.noalias() += d_p.transpose() * c.z;
  g.w_gate.noalias() += d_gate_pre.transpose() * c.z;
  Matrix d_z = d_p * p.w_in;
  d_z.noalias() += d_gate_pre * p.w_gate;

  for (Eigen::Index t = 0; t < len; ++t)
    d_u.row(t) += rms_norm_backward(c.u.row(t), c.inv_rms[t], p.norm_gain, d_z.row(t), g.norm_gain);
  return d_u;
}

LossAndGrads loss_and_grads(std::span<const TrainingExample> batch, const ModelParams& params) {
  const auto& cfg = params.config();
  const double weight = 1.0 / static_cast<double>(total_answers(batch));
  LossAndGrads out{0.0, ModelParams::zeros(cfg)};

  for (const auto& ex : batch) {
    HiddenState state = HiddenState::zeros(cfg);
    SequenceCache ctx;
    forward_tokens(params, ex.tokens, state, &ctx);

    auto d_ctx_state = zero_state_grads(cfg);
    for (const auto& br : ex.branches) {
      HiddenState branch_state = state;
      SequenceCache bc;
      forward_tokens(params, br.suffix, branch_state, &bc);
      Matrix d_top = Matrix::Zero(bc.top.rows(), bc.top.cols());
      d_top.row(d_top.rows() - 1) =
          head_backward(params, bc.top.row(bc.top.rows() - 1), br.gold, weight, out.loss, out.grads);
      auto d_state = zero_state_grads(cfg);
      backward_tokens(params, bc, std::move(d_top), d_state, out.grads);
      for (std::size_t l = 0; l < d_state.size(); ++l) {
        d_ctx_state[l].ssm += d_state[l].ssm;
        d_ctx_state[l].conv += d_state[l].conv;
      }
    }

    if (ex.tokens.empty()) continue;
    Matrix d_top = Matrix::Zero(ctx.top.rows(), ctx.top.cols());
    for (const auto& ans : ex.answers) {
      const auto row = static_cast<Eigen::Index>(ans.position);
      d_top.row(row) += head_backward(params, ctx.top.row(row), ans.gold, weight, out.loss, out.grads);
    }
    backward_tokens(params, ctx, std::move(d_top), d_ctx_state, out.grads);
  }
  if (!std::isfinite(out.loss) || !out.grads.all_finite()) throw NumericError("non-finite loss or gradient");
  return out;
}

double batch_loss(std::span<const TrainingExample> batch, const ModelParams& params) {
  const double weight = 1.0 / static_cast<double>(total_answers(batch));
  double loss = 0.0;
  for (const auto& ex : batch) {
    HiddenState state = HiddenState::zeros(params.config());
    const Matrix top = forward_tokens(params, ex.tokens, state);
    for (const auto& ans : ex.answers)
      loss += weight * answer_loss(params, top.row(static_cast<Eigen::Index>(ans.position)), ans.gold);
    for (const auto& br : ex.branches) {
      HiddenState branch_state = state;
      const Matrix btop = forward_tokens(params, br.suffix, branch_state);
      loss += weight * answer_loss(params, btop.row(btop.rows() - 1), br.gold);
    }
  }
  return loss;
}

double central_difference(const std::function<double(double)>& f, double x, double eps) {
  if (!(eps > 0.0)) throw UsageError("finite-difference step must be positive");
  return (f(x + eps) - f(x - eps)) / (2.0 * eps);
}

ModelParams finite_diff_grad(std::span<const TrainingExample> batch, const ModelParams& params, double eps) {
  if (!(eps > 0.0)) throw UsageError("finite-difference step must be positive");
  ModelParams probe = params;
  ModelParams grads = ModelParams::zeros(params.config());
  auto probe_tensors = probe.tensors();
  auto grad_tensors = grads.tensors();
  for (std::size_t i = 0; i < probe_tensors.size(); ++i) {
    auto& data = probe_tensors[i].data;
    for (std::size_t j = 0; j < data.size(); ++j) {
      const double saved = data[j];
      grad_tensors[i].data[j] = central_difference(
          [&](double v) {
            data[j] = v;
            return batch_loss(batch, probe);
          },
          saved, eps);
      data[j] = saved;
    }
  }
  return grads;
}

}  // namespace oprm
