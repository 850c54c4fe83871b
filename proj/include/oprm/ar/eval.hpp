#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "oprm/ar/sample.hpp"
#include "oprm/engine/oprm.hpp"

namespace oprm::ar {

/// Answers one recall prompt with at most `max_new_tokens` tokens. Must be
/// safe to call concurrently.
using GenerateFn = std::function<std::vector<TokenId>(const engine::PromptParts&, int max_new_tokens)>;

GenerateFn vanilla_fn(const engine::Backend& backend, engine::GenerationConfig config);
GenerateFn oprm_fn(const engine::Backend& backend, engine::GenerationConfig config);

enum class Protocol { controlled, zero_shot };

struct EvalConfig {
  std::vector<int> grid;
  int context_len = 96;
  int contexts_per_m = 100;
  std::vector<std::uint64_t> seeds{0};
  Protocol protocol = Protocol::controlled;
  /// Queries per context; 0 asks about every fact.
  int max_queries = 0;
  int workers = 1;

  void validate(const Vocab& vocab) const;
};

struct ARCurve {
  std::vector<int> grid;
  std::vector<double> accuracy;
  std::vector<int> queries;  // scored queries per grid point
  int contexts_per_m = 0;
  std::vector<std::uint64_t> seeds;

  std::optional<double> at(int m) const;
};

struct QueryOutcome {
  int m = 0;
  std::size_t fact_index = 0;
  double position = 0.0;  // fact start / N, in [0, 1)
  bool correct = false;
};

struct EvalResult {
  ARCurve curve;
  std::vector<QueryOutcome> outcomes;
};

/// Prompt for `sample` asking about fact `fact`: the layout as context and
/// the query marker plus key as suffix.
engine::PromptParts recall_prompt(const ARSample& sample, const Vocab& vocab, std::size_t fact);

/// Seed of context `c` at fact count `m` under evaluation seed `seed`.
std::uint64_t context_seed(std::uint64_t seed, int m, int c);

ARSample eval_sample(const EvalConfig& config, const Vocab& vocab, int m, std::uint64_t seed);

/// Exact match over all value tokens. Pure: the same function, grid and
/// seeds give the same curve regardless of `workers`.
EvalResult eval_ar_curve(const GenerateFn& generate, const Vocab& vocab, const EvalConfig& config);

enum class CapacityMode { expected_facts, threshold };

struct CapacityReport {
  int d = 0;
  int d_state = 0;
  int m_trained = 0;
  double capacity = 0.0;
  double ratio = 0.0;
};

inline constexpr double kCapacityThreshold = 0.9;

/// expected_facts: max over the grid of M * accuracy(M). threshold: largest
/// M whose accuracy is at least kCapacityThreshold (0 if none).
CapacityReport capacity_report(const ARCurve& curve, int m_trained, int d = 0, int d_state = 0,
                               CapacityMode mode = CapacityMode::expected_facts);

struct Histogram {
  std::vector<double> bins;  // normalized to sum 1 unless empty
  std::size_t successes = 0;
  bool empty = true;
};

/// Successful retrievals binned by their fact position fraction.
Histogram positional_histogram(const std::vector<QueryOutcome>& outcomes, int bins = 10);

/// One curve per context length, with identical facts and queries; only the
/// padding differs.
std::vector<ARCurve> length_sensitivity_sweep(const GenerateFn& generate, const Vocab& vocab, const EvalConfig& config,
                                              const std::vector<int>& lengths);

/// Headered tables: `label,M,accuracy,queries`, `d,d_state,M_trained,capacity,ratio`,
/// `bin,lo,hi,fraction`.
void write_curves_csv(std::ostream& out, const std::vector<std::pair<std::string, ARCurve>>& curves);
void write_capacity_csv(std::ostream& out, const std::vector<CapacityReport>& reports);
void write_histogram_csv(std::ostream& out, const Histogram& hist);

/// One JSON object per line: M, N, facts, layout, query_fact, query, gold.
void write_dataset(std::ostream& out, const std::vector<ARSample>& samples);
std::vector<ARSample> read_dataset(std::istream& in);

}  // namespace oprm::ar
