#include "oprm/core/state.hpp"

#include <limits>

namespace oprm {

LayerState LayerState::zeros(const ModelConfig& config) {
  return {Matrix::Zero(config.d, config.d_state), Matrix::Zero(config.conv_width - 1, config.d)};
}

HiddenState HiddenState::zeros(const ModelConfig& config) {
  HiddenState s;
  s.layers.assign(config.n_layers, LayerState::zeros(config));
  return s;
}

bool HiddenState::all_finite() const {
  for (const auto& l : layers)
    if (!l.ssm.allFinite() || !l.conv.allFinite()) return false;
  return true;
}

double HiddenState::max_abs_diff(const HiddenState& other) const {
  constexpr double inf = std::numeric_limits<double>::infinity();
  if (layers.size() != other.layers.size() || position != other.position) return inf;
  double m = 0.0;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& a = layers[i];
    const auto& b = other.layers[i];
    if (a.ssm.rows() != b.ssm.rows() || a.ssm.cols() != b.ssm.cols() || a.conv.rows() != b.conv.rows() ||
        a.conv.cols() != b.conv.cols())
      return inf;
    if (a.ssm.size()) m = std::max(m, (a.ssm - b.ssm).cwiseAbs().maxCoeff());
    if (a.conv.size()) m = std::max(m, (a.conv - b.conv).cwiseAbs().maxCoeff());
  }
  return m;
}

}  // namespace oprm
