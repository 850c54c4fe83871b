#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "oprm/core/model.hpp"
#include "oprm/core/state.hpp"

namespace oprm {

struct Discretized {
  Vector a_bar;  // exp(A * delta), each entry in (0, 1]
  Vector b_bar;  // B * delta
};

/// Zero-order-hold style discretization of one channel's S6 parameters.
/// Throws NumericError on non-finite input, UsageError on delta < 0.
Discretized discretize(std::span<const double> a_row, double delta, std::span<const double> b);

/// Everything the backward pass needs from an S6 scan.
struct S6Trace {
  Matrix delta_pre;  // L x d, before softplus
  Matrix delta;      // L x d
  Matrix b;          // L x d_state
  Matrix c;          // L x d_state
  std::vector<Matrix> a_bar;   // L entries of d x d_state
  std::vector<Matrix> states;  // L + 1 entries, states[0] is the incoming state
};

/// Selective scan over `x` (L x d). `state` is read as h_0 and left holding
/// h_L. `position` is only used to label numeric errors.
Matrix s6_scan(const BlockParams& p, const Matrix& x, Matrix& state, S6Trace* trace = nullptr,
               std::int64_t position = 0);

struct BlockCache {
  Matrix u;            // L x d block input
  Vector inv_rms;      // L
  Matrix z;            // normalized input
  Matrix gate_pre;     // L x d
  Matrix gate;         // SiLU(gate_pre)
  Matrix p_ext;        // (k-1+L) x d convolution inputs including carried history
  Matrix x;            // L x d convolution output, S6 input
  S6Trace s6;
  Matrix y;            // L x d S6 output
};

/// Pre-norm residual gated S6 block: out = u + S6(Conv1D(W_in z)) * SiLU(W_gate z)
/// with z = RMSNorm(u). Advances `state` past the L rows of `u`.
Matrix mamba_block_forward(const BlockParams& p, const Matrix& u, LayerState& state, BlockCache* cache = nullptr,
                           std::int64_t position = 0);

inline constexpr double kRmsEps = 1e-6;

}  // namespace oprm
