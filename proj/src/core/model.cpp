#include "oprm/core/model.hpp"

#include <cmath>
#include <random>

#include "oprm/errors.hpp"

namespace oprm {

void ModelConfig::validate() const {
  if (vocab_size <= 0 || d <= 0 || d_state <= 0 || conv_width <= 0 || n_layers <= 0)
    throw UsageError("model dimensions must be positive");
}

ModelParams ModelParams::zeros(const ModelConfig& config) {
  config.validate();
  ModelParams p(config);
  const int d = config.d;
  const int n = config.d_state;
  p.embed = Matrix::Zero(config.vocab_size, d);
  p.blocks.resize(config.n_layers);
  for (auto& b : p.blocks) {
    b.norm_gain = RowVector::Zero(d);
    b.w_gate = Matrix::Zero(d, d);
    b.w_in = Matrix::Zero(d, d);
    b.conv = Matrix::Zero(d, config.conv_width);
    b.s_delta = Matrix::Zero(d, d);
    b.delta_bias = RowVector::Zero(d);
    b.s_b = Matrix::Zero(n, d);
    b.s_c = Matrix::Zero(n, d);
    b.a_log = Matrix::Zero(d, n);
  }
  p.final_norm = RowVector::Zero(d);
  p.head = Matrix::Zero(d, config.vocab_size);
  return p;
}

namespace {

void fill_uniform(Matrix& m, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-bound, bound);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
}

}  // namespace

ModelParams ModelParams::init(const ModelConfig& config, std::uint64_t seed) {
  ModelParams p = zeros(config);
  std::mt19937_64 rng(seed);
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(config.d));
  fill_uniform(p.embed, 1.0, rng);
  std::uniform_real_distribution<double> log_dt(std::log(0.01), std::log(0.1));
  for (auto& b : p.blocks) {
    b.norm_gain.setOnes();
    fill_uniform(b.w_gate, inv_sqrt_d, rng);
    fill_uniform(b.w_in, inv_sqrt_d, rng);
    fill_uniform(b.conv, 1.0 / std::sqrt(static_cast<double>(config.conv_width)), rng);
    fill_uniform(b.s_delta, inv_sqrt_d, rng);
    for (int c = 0; c < config.d; ++c) {
      const double dt = std::exp(log_dt(rng));
      b.delta_bias[c] = dt + std::log(-std::expm1(-dt));  // softplus^-1
    }
    fill_uniform(b.s_b, inv_sqrt_d, rng);
    fill_uniform(b.s_c, inv_sqrt_d, rng);
    for (int c = 0; c < config.d; ++c)
      for (int n = 0; n < config.d_state; ++n) b.a_log(c, n) = std::log(static_cast<double>(n + 1));
  }
  p.final_norm.setOnes();
  fill_uniform(p.head, inv_sqrt_d, rng);
  return p;
}

namespace {

template <typename Params, typename Out>
void collect(Params& p, Out& out) {
  auto add = [&out](std::string name, auto& m) { out.push_back({std::move(name), {m.data(), static_cast<std::size_t>(m.size())}}); };
  add("embed", p.embed);
  for (std::size_t i = 0; i < p.blocks.size(); ++i) {
    auto& b = p.blocks[i];
    const std::string pre = "blocks." + std::to_string(i) + ".";
    add(pre + "norm_gain", b.norm_gain);
    add(pre + "w_gate", b.w_gate);
    add(pre + "w_in", b.w_in);
    add(pre + "conv", b.conv);
    add(pre + "s_delta", b.s_delta);
    add(pre + "delta_bias", b.delta_bias);
    add(pre + "s_b", b.s_b);
    add(pre + "s_c", b.s_c);
    add(pre + "a_log", b.a_log);
  }
  add("final_norm", p.final_norm);
  add("head", p.head);
}

}  // namespace

std::vector<NamedTensor> ModelParams::tensors() {
  std::vector<NamedTensor> out;
  collect(*this, out);
  return out;
}

std::vector<ConstNamedTensor> ModelParams::tensors() const {
  std::vector<ConstNamedTensor> out;
  collect(*this, out);
  return out;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors()) n += t.data.size();
  return n;
}

bool ModelParams::all_finite() const {
  for (const auto& t : tensors())
    for (double x : t.data)
      if (!std::isfinite(x)) return false;
  return true;
}

bool ModelParams::same_shape(const ModelParams& other) const {
  const auto a = tensors();
  const auto b = other.tensors();
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i].data.size() != b[i].data.size()) return false;
  return config_ == other.config_;
}

void ModelParams::set_zero() {
  for (auto& t : tensors()) std::fill(t.data.begin(), t.data.end(), 0.0);
}

ModelParams& ModelParams::operator+=(const ModelParams& other) {
  if (!same_shape(other)) throw UsageError("parameter shape mismatch");
  auto a = tensors();
  const auto b = other.tensors();
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[i].data.size(); ++j) a[i].data[j] += b[i].data[j];
  return *this;
}

ModelParams& ModelParams::operator*=(double s) {
  for (auto& t : tensors())
    for (double& x : t.data) x *= s;
  return *this;
}

double max_abs_diff(const ModelParams& a, const ModelParams& b) {
  if (!a.same_shape(b)) throw UsageError("parameter shape mismatch");
  const auto ta = a.tensors();
  const auto tb = b.tensors();
  double m = 0.0;
  for (std::size_t i = 0; i < ta.size(); ++i)
    for (std::size_t j = 0; j < ta[i].data.size(); ++j) m = std::max(m, std::abs(ta[i].data[j] - tb[i].data[j]));
  return m;
}

}  // namespace oprm
