#include "oprm/ar/train.hpp"

#include <cmath>
#include <numbers>
#include <ostream>

#include "oprm/ar/sample.hpp"
#include "oprm/core/backprop.hpp"
#include "oprm/errors.hpp"
#include "oprm/io/table.hpp"

namespace oprm::ar {

ModelConfig TrainConfig::model_config() const {
  return ModelConfig{vocab().size, d, d_state, conv_width, n_layers};
}

double TrainConfig::lr_at(int step) const {
  if (step < warmup_steps) return lr * (step + 1) / warmup_steps;
  const int span = steps - warmup_steps;
  if (span <= 0 || min_lr_ratio == 1.0) return lr;
  const double frac = static_cast<double>(step - warmup_steps) / span;
  return lr * (min_lr_ratio + (1.0 - min_lr_ratio) * 0.5 * (1.0 + std::cos(std::numbers::pi * frac)));
}

void TrainConfig::validate() const {
  model_config().validate();
  vocab().validate();
  if (m_blend.empty()) throw UsageError("m_blend must not be empty");
  for (int m : m_blend) {
    if (m < 1 || 2 * m > context_len) throw UsageError("m_blend entry " + std::to_string(m) + " does not fit N");
    if (m > n_keys) throw UsageError("m_blend entry " + std::to_string(m) + " exceeds n_keys");
  }
  if (blend_rounds < 1) throw UsageError("blend_rounds must be >= 1");
  if (steps < 0) throw UsageError("steps must be >= 0");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw UsageError("lr must be positive");
  if (!(weight_decay >= 0.0)) throw UsageError("weight_decay must be >= 0");
  if (warmup_steps < 0) throw UsageError("warmup_steps must be >= 0");
  if (!(min_lr_ratio > 0.0 && min_lr_ratio <= 1.0)) throw UsageError("min_lr_ratio must be in (0, 1]");
  if (!(clip_norm >= 0.0)) throw UsageError("clip_norm must be >= 0");
  if (checkpoint_every < 0) throw UsageError("checkpoint_every must be >= 0");
  if (idk_queries < 0) throw UsageError("idk_queries must be >= 0");
}

void annotate_checkpoint(Checkpoint& ckpt, const TrainConfig& config) {
  ckpt.extra["n_keys"] = std::to_string(config.n_keys);
  ckpt.extra["n_values"] = std::to_string(config.n_values);
  ckpt.extra["context_len"] = std::to_string(config.context_len);
  std::string blend;
  for (int m : config.m_blend) blend += (blend.empty() ? "" : " ") + std::to_string(m);
  ckpt.extra["m_blend"] = blend;
}

Vocab checkpoint_vocab(const Checkpoint& ckpt) {
  auto get = [&](const char* key) {
    auto it = ckpt.extra.find(key);
    if (it == ckpt.extra.end()) throw UsageError(std::string("checkpoint lacks '") + key + "' metadata");
    return std::stoi(it->second);
  };
  Vocab v = Vocab::controlled(get("n_keys"), get("n_values"));
  if (v.size != ckpt.params.config().vocab_size) throw UsageError("checkpoint vocabulary metadata disagrees with |V|");
  return v;
}

TrainResult train_controlled(const TrainConfig& config, const TrainHooks& hooks) {
  config.validate();
  const Vocab vocab = config.vocab();
  const ModelConfig mc = config.model_config();

  ModelParams params = ModelParams::init(mc, config.seed);
  OptimizerState opt = OptimizerState::zeros(mc);
  std::vector<int> blend;
  for (int r = 0; r < config.blend_rounds; ++r) blend.insert(blend.end(), config.m_blend.begin(), config.m_blend.end());

  TrainResult result;
  auto snapshot = [&](std::int64_t step) {
    Checkpoint ckpt{params, config.seed, step, {}};
    round_to_float(ckpt.params);
    annotate_checkpoint(ckpt, config);
    return ckpt;
  };

  // Batch seeds are independent of the init seed's stream but derived from it.
  const std::uint64_t data_seed = config.seed * 0xD1B54A32D192ED03ULL + 0x8BB84B93962EACC9ULL;
  for (int s = 0; s < config.steps; ++s) {
    const auto batch = make_training_batch(blend, config.context_len, vocab, data_seed + static_cast<std::uint64_t>(s),
                                           config.idk_queries);
    LossAndGrads lg;
    try {
      lg = loss_and_grads(batch, params);
    } catch (const NumericError& e) {
      throw NumericError(std::string("training diverged: ") + e.what(), s + 1);
    }
    if (!std::isfinite(lg.loss)) throw NumericError("training diverged: non-finite loss", s + 1);

    LossRecord rec{s + 1, lg.loss, 0.0, config.lr_at(s)};
    rec.grad_norm = clip_grad_norm(lg.grads, config.clip_norm > 0.0 ? config.clip_norm
                                                                     : std::numeric_limits<double>::infinity());
    AdamWConfig ac;
    ac.lr = rec.lr;
    ac.weight_decay = config.weight_decay;
    apply_update(params, lg.grads, opt, ac);
    if (!params.all_finite()) throw NumericError("training diverged: non-finite parameters", s + 1);

    result.log.push_back(rec);
    if (hooks.on_step) hooks.on_step(rec);
    if (config.checkpoint_every > 0 && (s + 1) % config.checkpoint_every == 0 && s + 1 < config.steps &&
        hooks.on_checkpoint)
      hooks.on_checkpoint(snapshot(s + 1));
  }
  result.final = snapshot(config.steps);
  if (hooks.on_checkpoint) hooks.on_checkpoint(result.final);
  return result;
}

void write_loss_log(std::ostream& out, const std::vector<LossRecord>& log) {
  io::CsvWriter csv(out, {"step", "loss", "grad_norm", "lr"});
  for (const auto& r : log) csv.row(r.step, r.loss, r.grad_norm, r.lr);
}

}  // namespace oprm::ar
