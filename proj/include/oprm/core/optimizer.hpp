#pragma once

#include <cstdint>

#include "oprm/core/model.hpp"

namespace oprm {

struct AdamWConfig {
  double lr = 1e-3;
  double weight_decay = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First/second moment accumulators shaped like the model.
struct OptimizerState {
  ModelParams m;
  ModelParams v;
  std::int64_t step = 0;

  static OptimizerState zeros(const ModelConfig& config);
};

/// One AdamW step with decoupled weight decay, applied to every tensor.
/// Throws UsageError when shapes disagree.
void apply_update(ModelParams& params, const ModelParams& grads, OptimizerState& opt, const AdamWConfig& cfg);

/// Rescales `grads` so its global L2 norm is at most `max_norm`; returns the
/// norm before clipping. `max_norm <= 0` disables clipping.
double clip_grad_norm(ModelParams& grads, double max_norm);

}  // namespace oprm
