#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

#include "oprm/core/checkpoint.hpp"
#include "oprm/core/optimizer.hpp"
#include "oprm/core/vocab.hpp"

namespace oprm::ar {

/// Controlled-setup training: single-token keys and values, a blend of fact
/// counts per batch, AdamW with linear warmup then cosine decay.
struct TrainConfig {
  int d = 64;
  int d_state = 4;
  int n_layers = 2;
  int conv_width = 4;
  int n_keys = 64;
  int n_values = 64;

  int context_len = 96;             // N
  std::vector<int> m_blend{1, 2, 4, 8, 16, 32};
  int blend_rounds = 1;             // contexts per blend entry in each batch
  int steps = 2000;
  double lr = 1e-3;
  double weight_decay = 0.1;
  int warmup_steps = 0;
  double min_lr_ratio = 1.0;        // 1.0 keeps the rate constant after warmup
  double clip_norm = 0.0;           // 0 disables clipping
  std::uint64_t seed = 0;
  int checkpoint_every = 0;         // 0: final checkpoint only
  int idk_queries = 0;              // instructed present/absent queries per context

  Vocab vocab() const { return Vocab::controlled(n_keys, n_values); }
  ModelConfig model_config() const;
  /// Learning rate used at 0-based `step`.
  double lr_at(int step) const;
  void validate() const;
};

struct LossRecord {
  std::int64_t step = 0;  // 1-based: loss of the batch consumed by update `step`
  double loss = 0.0;
  double grad_norm = 0.0;
  double lr = 0.0;
};

struct TrainResult {
  Checkpoint final;
  std::vector<LossRecord> log;
};

struct TrainHooks {
  /// Called every `checkpoint_every` steps and once at the end.
  std::function<void(const Checkpoint&)> on_checkpoint;
  std::function<void(const LossRecord&)> on_step;
};

/// Deterministic in `config`. Checkpoint parameters are rounded through
/// float32 so in-memory and reloaded models agree. Throws NumericError with
/// the step index on a non-finite loss or gradient.
TrainResult train_controlled(const TrainConfig& config, const TrainHooks& hooks = {});

/// Metadata written next to a trained model so it can be evaluated later.
void annotate_checkpoint(Checkpoint& ckpt, const TrainConfig& config);
Vocab checkpoint_vocab(const Checkpoint& ckpt);

/// `step,loss,grad_norm,lr` with 6-decimal reals.
void write_loss_log(std::ostream& out, const std::vector<LossRecord>& log);

}  // namespace oprm::ar
