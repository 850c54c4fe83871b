#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "oprm/core/tensor.hpp"

namespace oprm {

struct ModelConfig {
  int vocab_size = 0;
  int d = 0;
  int d_state = 0;
  int conv_width = 4;
  int n_layers = 2;

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

/// Learnable tensors of one gated S6 block. Shapes are `rows x cols`; the
/// projections act on row vectors as `x * W^T`.
struct BlockParams {
  RowVector norm_gain;  // d
  Matrix w_gate;        // d x d
  Matrix w_in;          // d x d, feeds the convolution
  Matrix conv;          // d x k, column k-1 multiplies the current token
  Matrix s_delta;       // d x d
  RowVector delta_bias; // d
  Matrix s_b;           // d_state x d
  Matrix s_c;           // d_state x d
  Matrix a_log;         // d x d_state, A = -exp(a_log)

  /// The strictly negative state matrix A.
  Matrix a() const { return -a_log.array().exp().matrix(); }
};

struct NamedTensor {
  std::string name;
  std::span<double> data;
};

struct ConstNamedTensor {
  std::string name;
  std::span<const double> data;
};

class ModelParams {
 public:
  ModelParams() = default;

  /// All-zero tensors with shapes derived from `config`.
  static ModelParams zeros(const ModelConfig& config);
  /// Seeded initialization: A[c][n] = -(n+1), softplus(delta_bias) in
  /// [0.01, 0.1] log-uniformly, unit norm gains, projections uniform in
  /// +-1/sqrt(fan_in).
  static ModelParams init(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }

  Matrix embed;  // |V| x d
  std::vector<BlockParams> blocks;
  RowVector final_norm;  // d
  Matrix head;           // d x |V|

  /// Every tensor in checkpoint order.
  std::vector<NamedTensor> tensors();
  std::vector<ConstNamedTensor> tensors() const;
  std::size_t parameter_count() const;

  bool all_finite() const;
  bool same_shape(const ModelParams& other) const;

  void set_zero();
  ModelParams& operator+=(const ModelParams& other);
  ModelParams& operator*=(double s);

 private:
  explicit ModelParams(const ModelConfig& config) : config_(config) {}
  ModelConfig config_;
};

/// Largest |a - b| over all entries; throws UsageError on shape mismatch.
double max_abs_diff(const ModelParams& a, const ModelParams& b);

}  // namespace oprm
