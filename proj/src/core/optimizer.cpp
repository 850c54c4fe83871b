#include "oprm/core/optimizer.hpp"

#include <cmath>

#include "oprm/errors.hpp"

namespace oprm {

OptimizerState OptimizerState::zeros(const ModelConfig& config) {
  return {ModelParams::zeros(config), ModelParams::zeros(config), 0};
}

void apply_update(ModelParams& params, const ModelParams& grads, OptimizerState& opt, const AdamWConfig& cfg) {
  if (!params.same_shape(grads) || !params.same_shape(opt.m) || !params.same_shape(opt.v))
    throw UsageError("optimizer shape mismatch");
  ++opt.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(opt.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(opt.step));
  auto p = params.tensors();
  const auto g = grads.tensors();
  auto m = opt.m.tensors();
  auto v = opt.v.tensors();
  for (std::size_t i = 0; i < p.size(); ++i) {
    for (std::size_t j = 0; j < p[i].data.size(); ++j) {
      const double gj = g[i].data[j];
      double& mj = m[i].data[j];
      double& vj = v[i].data[j];
      mj = cfg.beta1 * mj + (1.0 - cfg.beta1) * gj;
      vj = cfg.beta2 * vj + (1.0 - cfg.beta2) * gj * gj;
      double& pj = p[i].data[j];
      pj -= cfg.lr * cfg.weight_decay * pj;
      pj -= cfg.lr * (mj / bc1) / (std::sqrt(vj / bc2) + cfg.eps);
    }
  }
}

double clip_grad_norm(ModelParams& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& t : std::as_const(grads).tensors())
    for (double x : t.data) sq += x * x;
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) grads *= max_norm / norm;
  return norm;
}

}  // namespace oprm
