#pragma once

#include <cstdint>
#include <vector>

#include "oprm/core/model.hpp"

namespace oprm {

/// Recurrent state of one block.
struct LayerState {
  Matrix ssm;   // d x d_state, the S6 state h_t
  Matrix conv;  // (k-1) x d pre-convolution inputs, oldest row first

  static LayerState zeros(const ModelConfig& config);
};

/// The full model state carried between prefill and decode calls.
struct HiddenState {
  std::vector<LayerState> layers;
  std::int64_t position = 0;

  static HiddenState zeros(const ModelConfig& config);
  bool all_finite() const;
  /// Largest elementwise difference; infinity when shapes differ.
  double max_abs_diff(const HiddenState& other) const;
};

}  // namespace oprm
