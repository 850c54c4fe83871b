#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "oprm/ar/eval.hpp"
#include "oprm/ar/train.hpp"
#include "oprm/engine/oprm.hpp"

namespace oprm::io {

/// `section.key` -> whitespace-separated values, as read from the file.
using RawConfig = std::map<std::string, std::vector<std::string>>;

/// INI-style text: `[section]` headers, `key = value` lines, `#`/`;` comments.
/// Keys before any section belong to `run`. Throws UsageError on syntax errors.
RawConfig parse_config(std::istream& in);
RawConfig load_config_file(const std::filesystem::path& path);

struct RunOptions {
  std::uint64_t seed = 0;
  int workers = 1;
  std::string out;
};

struct TrainOptions {
  ar::TrainConfig config;
  /// Optional grid: one model per (d, d_state, seed) cell.
  std::vector<int> grid_d;
  std::vector<int> grid_d_state;
  std::vector<std::uint64_t> seeds;
};

enum class Variant { oprm, summ, cc };

struct OprmOptions {
  int chunk_size = 12;
  engine::Criterion criterion = engine::Criterion::min_entropy;
  bool idk_filter = false;
  std::size_t fixed_index = 0;
  engine::Decoding::Kind decoding = engine::Decoding::Kind::greedy;
  double temperature = 1.0;
  Variant variant = Variant::oprm;
  std::size_t top_k = 2;

  /// Engine settings for a model over `vocab`.
  engine::GenerationConfig generation(const Vocab& vocab, std::uint64_t seed, int workers) const;
};

struct EvalOptions {
  std::vector<std::string> checkpoints;
  std::vector<std::string> modes{"baseline", "oprm"};
  ar::EvalConfig eval{{1, 2, 4, 8, 16, 32}};  // grid, context_len, contexts_per_m, seeds, max_queries
  std::vector<int> lengths;  // length-sensitivity sweep; empty disables it
  bool histogram = true;
  ar::CapacityMode capacity_mode = ar::CapacityMode::expected_facts;
  int m_trained = 32;
  bool plots = true;
};

struct BenchOptions {
  std::string checkpoint;  // empty: synthetic parameters
  int d = 64;
  int d_state = 4;
  int vocab_keys = 64;
  int vocab_values = 16;
  int chunk_len = 64;
  std::vector<int> chunks{1, 2, 4, 8, 16, 32};
  int decode_tokens = 10;
  int repeats = 3;
};

struct DataOptions {
  ar::Protocol protocol = ar::Protocol::controlled;
  std::vector<int> grid{1, 2, 4, 8, 16, 32};
  int context_len = 96;
  int samples_per_m = 10;
  int n_keys = 64;
  int n_values = 16;
};

struct PromptOptions {
  std::string checkpoint;
  std::vector<TokenId> prefix;
  std::vector<TokenId> context;
  std::vector<TokenId> suffix;
  /// Query span inside the suffix; defaults to everything after its first token.
  std::optional<std::size_t> query_begin;
  std::optional<std::size_t> query_end;
  int max_new_tokens = 1;
  /// Alternatively take the prompt from a dataset record.
  std::string dataset;
  std::size_t record = 0;
};

struct ExperimentConfig {
  RunOptions run;
  TrainOptions train;
  OprmOptions oprm;
  EvalOptions eval;
  BenchOptions bench;
  DataOptions data;
  PromptOptions prompt;
};

/// Applies `raw` over the defaults. Unknown keys, malformed values and
/// missing fields in `required` raise UsageError naming the key. The worker
/// default comes from OPRM_WORKERS when set.
ExperimentConfig bind_config(const RawConfig& raw, const std::vector<std::string>& required = {});

/// Every known key with its effective value, for manifests.
std::map<std::string, std::string> config_snapshot(const ExperimentConfig& config);

/// Worker budget from the environment (OPRM_WORKERS) or 1.
int default_workers();

}  // namespace oprm::io
