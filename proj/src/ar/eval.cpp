#include "oprm/ar/eval.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>

#include <json.hpp>

#include "oprm/engine/parallel.hpp"
#include "oprm/errors.hpp"
#include "oprm/io/table.hpp"

namespace oprm::ar {

GenerateFn vanilla_fn(const engine::Backend& backend, engine::GenerationConfig config) {
  return [&backend, config](const engine::PromptParts& parts, int max_new) {
    auto c = config;
    c.max_new_tokens = max_new;
    return engine::vanilla_generate(backend, parts, c);
  };
}

GenerateFn oprm_fn(const engine::Backend& backend, engine::GenerationConfig config) {
  return [&backend, config](const engine::PromptParts& parts, int max_new) {
    auto c = config;
    c.max_new_tokens = max_new;
    return engine::oprm_generate(backend, parts, c).tokens;
  };
}

void EvalConfig::validate(const Vocab& vocab) const {
  vocab.validate();
  if (grid.empty()) throw UsageError("evaluation grid must not be empty");
  if (!std::is_sorted(grid.begin(), grid.end()) || std::adjacent_find(grid.begin(), grid.end()) != grid.end())
    throw UsageError("evaluation grid must be strictly increasing");
  if (grid.front() < 1) throw UsageError("evaluation grid entries must be positive");
  if (contexts_per_m < 1) throw UsageError("contexts_per_m must be >= 1");
  if (seeds.empty()) throw UsageError("at least one evaluation seed is required");
  if (max_queries < 0) throw UsageError("max_queries must be >= 0");
  if (workers < 1) throw UsageError("workers must be >= 1");
  const int fact_len = protocol == Protocol::controlled ? 2 : kZeroShotKeyLen + kZeroShotValueLen;
  if (grid.back() * fact_len > context_len)
    throw UsageError("largest M (" + std::to_string(grid.back()) + ") does not fit N=" + std::to_string(context_len));
}

std::optional<double> ARCurve::at(int m) const {
  for (std::size_t i = 0; i < grid.size(); ++i)
    if (grid[i] == m) return accuracy[i];
  return std::nullopt;
}

engine::PromptParts recall_prompt(const ARSample& sample, const Vocab& vocab, std::size_t fact) {
  engine::PromptParts parts;
  parts.context = sample.layout;
  parts.suffix = query_suffix(vocab, sample.facts.at(fact).key);
  parts.query_begin = 1;
  parts.query_end = parts.suffix.size();
  return parts;
}

std::uint64_t context_seed(std::uint64_t seed, int m, int c) {
  // splitmix64 over the packed coordinates
  std::uint64_t x = seed ^ (static_cast<std::uint64_t>(m) << 32) ^ static_cast<std::uint64_t>(c);
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

ARSample eval_sample(const EvalConfig& config, const Vocab& vocab, int m, std::uint64_t seed) {
  return config.protocol == Protocol::controlled ? gen_controlled_sample(m, config.context_len, vocab, seed)
                                                 : gen_zero_shot_sample(m, config.context_len, vocab, seed);
}

namespace {

/// Facts to query in a context: all of them, or a seeded subset in index order.
std::vector<std::size_t> query_set(const ARSample& s, int max_queries, std::uint64_t seed) {
  std::vector<std::size_t> idx(s.facts.size());
  std::iota(idx.begin(), idx.end(), 0);
  if (max_queries > 0 && idx.size() > static_cast<std::size_t>(max_queries)) {
    std::mt19937_64 rng(seed ^ 0x5851F42D4C957F2DULL);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(max_queries);
    std::sort(idx.begin(), idx.end());
  }
  return idx;
}

struct Job {
  int m;
  std::uint64_t seed;
};

/// Evaluates a list of prepared samples in parallel and reduces in order.
EvalResult run_jobs(const GenerateFn& generate, const Vocab& vocab, const EvalConfig& config,
                    const std::vector<int>& grid, const std::vector<ARSample>& samples,
                    const std::vector<std::uint64_t>& sample_seeds, std::size_t per_m) {
  std::vector<std::vector<QueryOutcome>> per_sample(samples.size());
  engine::parallel_for(
      samples.size(), config.workers, {},
      [&](std::size_t i) {
        const ARSample& s = samples[i];
        for (std::size_t f : query_set(s, config.max_queries, sample_seeds[i])) {
          const auto& gold = s.facts[f].value;
          const auto out = generate(recall_prompt(s, vocab, f), static_cast<int>(gold.size()));
          const bool ok = out.size() >= gold.size() && std::equal(gold.begin(), gold.end(), out.begin());
          per_sample[i].push_back({s.m, f, static_cast<double>(s.fact_offsets[f]) / s.n, ok});
        }
      },
      "context");

  EvalResult r;
  r.curve.grid = grid;
  r.curve.contexts_per_m = config.contexts_per_m;
  r.curve.seeds = config.seeds;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    int ok = 0, total = 0;
    for (std::size_t i = g * per_m; i < (g + 1) * per_m; ++i) {
      for (const auto& o : per_sample[i]) {
        ok += o.correct;
        ++total;
        r.outcomes.push_back(o);
      }
    }
    r.curve.accuracy.push_back(total ? static_cast<double>(ok) / total : 0.0);
    r.curve.queries.push_back(total);
  }
  return r;
}

}  // namespace

EvalResult eval_ar_curve(const GenerateFn& generate, const Vocab& vocab, const EvalConfig& config) {
  config.validate(vocab);
  std::vector<ARSample> samples;
  std::vector<std::uint64_t> seeds;
  for (int m : config.grid)
    for (std::uint64_t seed : config.seeds)
      for (int c = 0; c < config.contexts_per_m; ++c) {
        seeds.push_back(context_seed(seed, m, c));
        samples.push_back(eval_sample(config, vocab, m, seeds.back()));
      }
  return run_jobs(generate, vocab, config, config.grid, samples, seeds, config.seeds.size() * config.contexts_per_m);
}

CapacityReport capacity_report(const ARCurve& curve, int m_trained, int d, int d_state, CapacityMode mode) {
  CapacityReport r{d, d_state, m_trained, 0.0, 0.0};
  for (std::size_t i = 0; i < curve.grid.size(); ++i) {
    if (mode == CapacityMode::expected_facts)
      r.capacity = std::max(r.capacity, curve.grid[i] * curve.accuracy[i]);
    else if (curve.accuracy[i] >= kCapacityThreshold)
      r.capacity = std::max(r.capacity, static_cast<double>(curve.grid[i]));
  }
  r.ratio = m_trained > 0 ? r.capacity / m_trained : 0.0;
  return r;
}

Histogram positional_histogram(const std::vector<QueryOutcome>& outcomes, int bins) {
  if (bins < 1) throw UsageError("histogram needs at least one bin");
  Histogram h;
  h.bins.assign(bins, 0.0);
  for (const auto& o : outcomes) {
    if (!o.correct) continue;
    const int b = std::clamp(static_cast<int>(std::floor(o.position * bins)), 0, bins - 1);
    h.bins[b] += 1.0;
    ++h.successes;
  }
  h.empty = h.successes == 0;
  if (!h.empty)
    for (double& b : h.bins) b /= static_cast<double>(h.successes);
  return h;
}

std::vector<ARCurve> length_sensitivity_sweep(const GenerateFn& generate, const Vocab& vocab, const EvalConfig& config,
                                              const std::vector<int>& lengths) {
  if (lengths.empty()) throw UsageError("length sweep needs at least one N");
  for (int n : lengths) {
    EvalConfig c = config;
    c.context_len = n;
    c.validate(vocab);
  }
  // Facts come from the first length's samples and are re-laid out per N.
  EvalConfig base = config;
  base.context_len = lengths.front();
  std::vector<ARSample> facts_only;
  std::vector<std::uint64_t> seeds;
  for (int m : config.grid)
    for (std::uint64_t seed : config.seeds)
      for (int c = 0; c < config.contexts_per_m; ++c) {
        seeds.push_back(context_seed(seed, m, c));
        facts_only.push_back(eval_sample(base, vocab, m, seeds.back()));
      }

  std::vector<ARCurve> curves;
  for (int n : lengths) {
    EvalConfig c = config;
    c.context_len = n;
    std::vector<ARSample> samples;
    samples.reserve(facts_only.size());
    for (const auto& s : facts_only) samples.push_back(layout_facts(s.facts, n, vocab, s.query_fact));
    curves.push_back(run_jobs(generate, vocab, c, c.grid, samples, seeds, c.seeds.size() * c.contexts_per_m).curve);
  }
  return curves;
}

void write_curves_csv(std::ostream& out, const std::vector<std::pair<std::string, ARCurve>>& curves) {
  io::CsvWriter csv(out, {"label", "M", "accuracy", "queries"});
  for (const auto& [label, c] : curves)
    for (std::size_t i = 0; i < c.grid.size(); ++i) csv.row(label, c.grid[i], c.accuracy[i], c.queries[i]);
}

void write_capacity_csv(std::ostream& out, const std::vector<CapacityReport>& reports) {
  io::CsvWriter csv(out, {"d", "d_state", "M_trained", "capacity", "ratio"});
  for (const auto& r : reports) csv.row(r.d, r.d_state, r.m_trained, r.capacity, r.ratio);
}

void write_histogram_csv(std::ostream& out, const Histogram& hist) {
  io::CsvWriter csv(out, {"bin", "lo", "hi", "fraction"});
  const double w = 1.0 / static_cast<double>(hist.bins.size());
  for (std::size_t b = 0; b < hist.bins.size(); ++b) csv.row(b, b * w, (b + 1) * w, hist.bins[b]);
}

void write_dataset(std::ostream& out, const std::vector<ARSample>& samples) {
  for (const auto& s : samples) {
    nlohmann::ordered_json facts = nlohmann::ordered_json::array();
    for (const auto& f : s.facts) facts.push_back({{"key", f.key}, {"value", f.value}});
    nlohmann::ordered_json j;
    j["M"] = s.m;
    j["N"] = s.n;
    j["facts"] = std::move(facts);
    j["layout"] = s.layout;
    j["query_fact"] = s.query_fact;
    j["query"] = s.query();
    j["gold"] = s.gold();
    out << j.dump() << '\n';
  }
}

std::vector<ARSample> read_dataset(std::istream& in) {
  std::vector<ARSample> out;
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      ARSample s;
      s.m = j.at("M").get<int>();
      s.n = j.at("N").get<int>();
      for (const auto& f : j.at("facts"))
        s.facts.push_back({f.at("key").get<std::vector<TokenId>>(), f.at("value").get<std::vector<TokenId>>()});
      s.layout = j.at("layout").get<std::vector<TokenId>>();
      s.query_fact = j.at("query_fact").get<std::size_t>();
      if (static_cast<int>(s.facts.size()) != s.m || static_cast<int>(s.layout.size()) != s.n ||
          s.query_fact >= s.facts.size() || j.at("query").get<std::vector<TokenId>>() != s.query() ||
          j.at("gold").get<std::vector<TokenId>>() != s.gold())
        throw UsageError("inconsistent record");
      std::size_t pos = 0;
      for (const auto& f : s.facts) {
        // Recover offsets by scanning: facts appear in order separated by pads.
        auto it = std::search(s.layout.begin() + static_cast<std::ptrdiff_t>(pos), s.layout.end(), f.key.begin(),
                              f.key.end());
        if (it == s.layout.end()) throw UsageError("fact missing from layout");
        s.fact_offsets.push_back(static_cast<std::size_t>(it - s.layout.begin()));
        pos = s.fact_offsets.back() + f.key.size() + f.value.size();
      }
      out.push_back(std::move(s));
    } catch (const nlohmann::json::exception& e) {
      throw UsageError("dataset line " + std::to_string(line_no) + ": " + e.what());
    } catch (const UsageError& e) {
      throw UsageError("dataset line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace oprm::ar
