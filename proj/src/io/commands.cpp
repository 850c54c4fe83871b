#include "oprm/io/commands.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "oprm/ar/stats.hpp"
#include "oprm/core/checkpoint.hpp"
#include "oprm/engine/backend.hpp"
#include "oprm/errors.hpp"
#include "oprm/io/manifest.hpp"
#include "oprm/io/svg.hpp"
#include "oprm/io/table.hpp"

namespace fs = std::filesystem;

namespace oprm::io {
namespace {

fs::path out_dir(const ExperimentConfig& c) {
  if (c.run.out.empty()) throw UsageError("config: missing required field 'run.out' (or --out)");
  return c.run.out;
}

std::ofstream open_out(const fs::path& p) {
  fs::create_directories(p.parent_path());
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  if (!f) throw UsageError("cannot write " + p.string());
  return f;
}

RunManifest start_manifest(const std::string& command, const ExperimentConfig& c) {
  RunManifest m;
  m.command = command;
  m.config = config_snapshot(c);
  return m;
}

/// Writes the table or plot produced by `emit` and records it in the manifest.
template <class Emit>
void artifact(RunManifest& m, const fs::path& root, const fs::path& rel, Emit&& emit) {
  {
    auto f = open_out(root / rel);
    emit(f);
    if (!f) throw UsageError("failed writing " + (root / rel).string());
  }
  m.add_artifact(root, rel);
}

std::string step_name(std::int64_t step) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "step_%06lld.ckpt", static_cast<long long>(step));
  return buf;
}

void train_one(const ar::TrainConfig& tc, const fs::path& root, const fs::path& rel, RunManifest& m, std::ostream& log) {
  std::vector<fs::path> written;
  ar::TrainHooks hooks;
  hooks.on_checkpoint = [&](const Checkpoint& ckpt) {
    const fs::path p = ckpt.step == tc.steps ? rel / "model.ckpt" : rel / "checkpoints" / step_name(ckpt.step);
    fs::create_directories((root / p).parent_path());
    save_checkpoint(root / p, ckpt);
    written.push_back(p);
  };
  const int report = std::max(1, tc.steps / 10);
  hooks.on_step = [&](const ar::LossRecord& r) {
    if (r.step % report == 0) log << "  step " << r.step << " loss " << format_real(r.loss) << '\n';
  };
  log << "training d=" << tc.d << " d_state=" << tc.d_state << " seed=" << tc.seed << " steps=" << tc.steps << '\n';
  const auto result = ar::train_controlled(tc, hooks);
  for (const auto& p : written) m.add_artifact(root, p);
  artifact(m, root, rel / "loss.csv", [&](std::ostream& o) { ar::write_loss_log(o, result.log); });
  if (!result.log.empty()) {
    Series s{"loss", {}, {}};
    for (const auto& r : result.log) {
      s.x.push_back(static_cast<double>(r.step));
      s.y.push_back(r.loss);
    }
    artifact(m, root, rel / "loss.svg", [&](std::ostream& o) {
      line_chart(o, {"Training loss", "step", "cross-entropy (nats)"}, {s});
    });
  }
}

Checkpoint load_model(const std::string& path) {
  if (path.empty()) throw UsageError("config: missing checkpoint path");
  if (!fs::exists(path)) throw UsageError("checkpoint not found: " + path);
  return load_checkpoint(path);
}

ar::GenerateFn generate_for(const std::string& mode, const engine::Backend& backend, const ExperimentConfig& c,
                            const Vocab& vocab) {
  // Contexts are already spread over workers; each generation runs serially.
  const auto g = c.oprm.generation(vocab, c.run.seed, 1);
  if (mode == "baseline") return ar::vanilla_fn(backend, g);
  if (mode == "oprm") return ar::oprm_fn(backend, g);
  throw UsageError("config: 'eval.modes' entries must be baseline or oprm, got '" + mode + "'");
}

std::vector<Series> curve_series(const std::vector<std::pair<std::string, ar::ARCurve>>& curves) {
  std::vector<Series> out;
  for (const auto& [label, cv] : curves) {
    Series s{label, {}, cv.accuracy};
    for (int m : cv.grid) s.x.push_back(m);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

void cmd_train(const ExperimentConfig& c, std::ostream& log) {
  const fs::path root = out_dir(c);
  DirectoryLock lock(root);
  RunManifest m = start_manifest("train", c);
  StageTimer timer(m);

  ar::TrainConfig base = c.train.config;
  base.seed = c.run.seed;
  const bool grid = !c.train.grid_d.empty() || !c.train.grid_d_state.empty() || !c.train.seeds.empty();
  if (!grid) {
    train_one(base, root, ".", m, log);
    timer.lap("train");
  } else {
    const auto ds = c.train.grid_d.empty() ? std::vector<int>{base.d} : c.train.grid_d;
    const auto ss = c.train.grid_d_state.empty() ? std::vector<int>{base.d_state} : c.train.grid_d_state;
    const auto seeds = c.train.seeds.empty() ? std::vector<std::uint64_t>{base.seed} : c.train.seeds;
    for (int d : ds)
      for (int s : ss)
        for (auto seed : seeds) {
          ar::TrainConfig tc = base;
          tc.d = d;
          tc.d_state = s;
          tc.seed = seed;
          const std::string cell = "d" + std::to_string(d) + "_s" + std::to_string(s) + "_seed" + std::to_string(seed);
          train_one(tc, root, cell, m, log);
          timer.lap("train " + cell);
        }
  }
  write_manifest(root / "manifest.json", m);
}

void cmd_eval(const ExperimentConfig& c, std::ostream& log) {
  const auto& e = c.eval;
  if (e.checkpoints.empty()) throw UsageError("config: missing required field 'eval.checkpoints'");
  if (e.modes.empty()) throw UsageError("config: 'eval.modes' must not be empty");
  std::vector<Checkpoint> models;
  for (const auto& p : e.checkpoints) models.push_back(load_model(p));

  const fs::path root = out_dir(c);
  DirectoryLock lock(root);
  RunManifest m = start_manifest("eval", c);
  StageTimer timer(m);

  ar::EvalConfig ec = e.eval;
  ec.workers = c.run.workers;

  std::vector<std::pair<std::string, ar::ARCurve>> curves;
  std::map<std::pair<int, int>, std::vector<ar::CapacityReport>> cells;
  std::vector<ar::QueryOutcome> first_outcomes;
  for (std::size_t k = 0; k < models.size(); ++k) {
    const Vocab vocab = ar::checkpoint_vocab(models[k]);
    engine::ModelBackend backend(models[k].params);
    for (const auto& mode : e.modes) {
      log << "evaluating " << e.checkpoints[k] << " (" << mode << ")\n";
      auto r = ar::eval_ar_curve(generate_for(mode, backend, c, vocab), vocab, ec);
      const std::string label = models.size() == 1 ? mode : e.checkpoints[k] + ":" + mode;
      if (mode == "baseline") {
        const auto& cfg = models[k].params.config();
        cells[{cfg.d, cfg.d_state}].push_back(ar::capacity_report(r.curve, e.m_trained, cfg.d, cfg.d_state, e.capacity_mode));
        if (k == 0) first_outcomes = r.outcomes;
      }
      curves.emplace_back(label, std::move(r.curve));
    }
  }
  timer.lap("curves");

  artifact(m, root, "curves.csv", [&](std::ostream& o) { ar::write_curves_csv(o, curves); });
  if (e.plots)
    artifact(m, root, "curves.svg", [&](std::ostream& o) {
      line_chart(o, {"Recall accuracy vs facts in context", "facts M", "accuracy", true, 0.0, 1.0}, curve_series(curves));
    });

  if (!cells.empty()) {
    std::vector<ar::CapacityReport> rows;
    for (const auto& [key, reps] : cells) {
      ar::CapacityReport avg{key.first, key.second, e.m_trained, 0.0, 0.0};
      for (const auto& r : reps) {
        avg.capacity += r.capacity / static_cast<double>(reps.size());
        avg.ratio += r.ratio / static_cast<double>(reps.size());
      }
      rows.push_back(avg);
    }
    artifact(m, root, "capacity.csv", [&](std::ostream& o) { ar::write_capacity_csv(o, rows); });
    if (e.plots) {
      std::vector<std::string> labels;
      std::vector<double> ratios;
      for (const auto& r : rows) {
        labels.push_back("d" + std::to_string(r.d) + "/s" + std::to_string(r.d_state));
        ratios.push_back(r.ratio);
      }
      artifact(m, root, "capacity.svg", [&](std::ostream& o) {
        bar_chart(o, {"Capacity ratio per model size", "model", "capacity / M trained"}, labels, ratios);
      });
    }
  }

  if (e.histogram && !first_outcomes.empty()) {
    const auto h = ar::positional_histogram(first_outcomes);
    if (h.empty) log << "positional histogram: no successful retrievals\n";
    artifact(m, root, "histogram.csv", [&](std::ostream& o) { ar::write_histogram_csv(o, h); });
    if (e.plots) {
      std::vector<std::string> labels;
      for (std::size_t b = 0; b < h.bins.size(); ++b) labels.push_back(std::to_string(b));
      artifact(m, root, "histogram.svg", [&](std::ostream& o) {
        bar_chart(o, {"Positions of retrieved facts", "position bin", "fraction of successes"}, labels, h.bins);
      });
    }
  }
  timer.lap("capacity+histogram");

  if (!e.lengths.empty()) {
    const Vocab vocab = ar::checkpoint_vocab(models[0]);
    engine::ModelBackend backend(models[0].params);
    const auto sweep = ar::length_sensitivity_sweep(generate_for("baseline", backend, c, vocab), vocab, ec, e.lengths);
    std::vector<std::pair<std::string, ar::ARCurve>> rows;
    for (std::size_t i = 0; i < sweep.size(); ++i) rows.emplace_back("N=" + std::to_string(e.lengths[i]), sweep[i]);
    artifact(m, root, "length_sweep.csv", [&](std::ostream& o) { ar::write_curves_csv(o, rows); });
    if (e.plots)
      artifact(m, root, "length_sweep.svg", [&](std::ostream& o) {
        line_chart(o, {"Accuracy vs facts for several context lengths", "facts M", "accuracy", true, 0.0, 1.0},
                   curve_series(rows));
      });
    timer.lap("length_sweep");
  }
  write_manifest(root / "manifest.json", m);
}

namespace {

struct BenchRow {
  int chunks = 0;
  int context_len = 0;
  double vanilla_prefill = 0, vanilla_decode = 0, oprm_prefill = 0, oprm_decode = 0;
  std::size_t vanilla_state_bytes = 0, oprm_peak_state_bytes = 0;
};

template <class F>
double best_time(int repeats, F&& f) {
  double best = INFINITY;
  for (int r = 0; r < repeats; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  return best;
}

}  // namespace

void cmd_bench(const ExperimentConfig& c, std::ostream& log) {
  const auto& b = c.bench;
  if (b.chunks.size() < 2) throw UsageError("config: 'bench.chunks' needs at least two values");
  if (b.repeats < 1 || b.decode_tokens < 1 || b.chunk_len < 1) throw UsageError("config: bench sizes must be positive");
  Checkpoint ckpt;
  Vocab vocab;
  if (!b.checkpoint.empty()) {
    ckpt = load_model(b.checkpoint);
    vocab = ar::checkpoint_vocab(ckpt);
  } else {
    vocab = Vocab::controlled(b.vocab_keys, b.vocab_values);
    ckpt.params = ModelParams::init({vocab.size, b.d, b.d_state, 4, 2}, c.run.seed);
  }
  const fs::path root = out_dir(c);
  DirectoryLock lock(root);
  RunManifest m = start_manifest("bench", c);
  StageTimer timer(m);

  engine::ModelBackend backend(ckpt.params);
  const auto& mc = ckpt.params.config();
  const std::size_t state_bytes =
      static_cast<std::size_t>(mc.n_layers) * (mc.d * mc.d_state + (mc.conv_width - 1) * mc.d) * sizeof(double);
  auto g = c.oprm.generation(vocab, c.run.seed, c.run.workers);
  g.chunk_len = b.chunk_len;

  std::mt19937_64 rng(c.run.seed);
  std::uniform_int_distribution<TokenId> tok(vocab.key_range.first, vocab.value_range.end() - 1);
  std::vector<BenchRow> rows;
  for (int n : b.chunks) {
    if (n < 1) throw UsageError("config: 'bench.chunks' entries must be positive");
    engine::PromptParts parts;
    parts.context.resize(static_cast<std::size_t>(n) * b.chunk_len);
    for (auto& t : parts.context) t = tok(rng);
    parts.suffix = {vocab.query_marker, vocab.key_range.first};
    parts.query_begin = 1;
    parts.query_end = 2;

    BenchRow r;
    r.chunks = n;
    r.context_len = static_cast<int>(parts.context.size());
    auto run = [&](bool chunked, int tokens) {
      auto cfg = g;
      cfg.max_new_tokens = tokens;
      return best_time(b.repeats, [&] {
        if (chunked) engine::oprm_generate(backend, parts, cfg);
        else engine::vanilla_generate(backend, parts, cfg);
      });
    };
    r.vanilla_prefill = run(false, 1);
    r.vanilla_decode = std::max(0.0, run(false, 1 + b.decode_tokens) - r.vanilla_prefill) / b.decode_tokens;
    r.oprm_prefill = run(true, 1);
    r.oprm_decode = std::max(0.0, run(true, 1 + b.decode_tokens) - r.oprm_prefill) / b.decode_tokens;
    r.vanilla_state_bytes = state_bytes;
    r.oprm_peak_state_bytes = state_bytes * static_cast<std::size_t>(n);
    log << "b=" << n << " vanilla " << format_real(r.vanilla_prefill) << "s oprm " << format_real(r.oprm_prefill) << "s\n";
    rows.push_back(r);
  }
  timer.lap("measure");

  artifact(m, root, "bench.csv", [&](std::ostream& o) {
    CsvWriter csv(o, {"chunks", "context_len", "vanilla_prefill_s", "vanilla_decode_token_s", "oprm_prefill_s",
                      "oprm_decode_token_s", "vanilla_state_bytes", "oprm_peak_state_bytes"});
    for (const auto& r : rows)
      csv.row(r.chunks, r.context_len, r.vanilla_prefill, r.vanilla_decode, r.oprm_prefill, r.oprm_decode,
              r.vanilla_state_bytes, r.oprm_peak_state_bytes);
  });
  std::vector<double> x;
  auto column = [&](double BenchRow::*f) {
    std::vector<double> v;
    for (const auto& r : rows) v.push_back(r.*f);
    return v;
  };
  for (const auto& r : rows) x.push_back(r.chunks);
  artifact(m, root, "bench_fit.csv", [&](std::ostream& o) {
    CsvWriter csv(o, {"series", "slope", "intercept", "r2"});
    for (auto [name, f] : {std::pair{"vanilla_prefill_s", &BenchRow::vanilla_prefill},
                           std::pair{"vanilla_decode_token_s", &BenchRow::vanilla_decode},
                           std::pair{"oprm_prefill_s", &BenchRow::oprm_prefill},
                           std::pair{"oprm_decode_token_s", &BenchRow::oprm_decode}}) {
      const auto fit = ar::fit_line(x, column(f));
      csv.row(name, fit.slope, fit.intercept, fit.r2);
    }
  });
  artifact(m, root, "bench.svg", [&](std::ostream& o) {
    line_chart(o, {"Prefill wall-clock vs chunk count", "chunks b", "seconds"},
               {{"vanilla", x, column(&BenchRow::vanilla_prefill)}, {"oprm", x, column(&BenchRow::oprm_prefill)}});
  });
  write_manifest(root / "manifest.json", m);
}

void cmd_oprm_run(const ExperimentConfig& c, std::ostream& log) {
  const auto& p = c.prompt;
  const Checkpoint ckpt = load_model(p.checkpoint);
  const Vocab vocab = ar::checkpoint_vocab(ckpt);

  engine::PromptParts parts;
  int max_new = p.max_new_tokens;
  if (!p.dataset.empty()) {
    std::ifstream in(p.dataset);
    if (!in) throw UsageError("cannot read dataset " + p.dataset);
    const auto samples = ar::read_dataset(in);
    if (p.record >= samples.size()) throw UsageError("config: 'prompt.record' is past the end of the dataset");
    parts = ar::recall_prompt(samples[p.record], vocab, samples[p.record].query_fact);
    max_new = std::max<int>(max_new, static_cast<int>(samples[p.record].gold().size()));
  } else {
    if (p.context.empty()) throw UsageError("config: missing required field 'prompt.context' (or 'prompt.dataset')");
    if (p.suffix.empty()) throw UsageError("config: missing required field 'prompt.suffix'");
    parts.prefix = p.prefix;
    parts.context = p.context;
    parts.suffix = p.suffix;
    parts.query_begin = p.query_begin.value_or(std::min<std::size_t>(1, p.suffix.size() - 1));
    parts.query_end = p.query_end.value_or(p.suffix.size());
  }
  for (const auto* seq : {&parts.prefix, &parts.context, &parts.suffix})
    for (TokenId t : *seq)
      if (t < 0 || t >= vocab.size) throw UsageError("prompt token " + std::to_string(t) + " is outside the vocabulary");

  const fs::path root = out_dir(c);
  DirectoryLock lock(root);
  RunManifest m = start_manifest("oprm-run", c);
  StageTimer timer(m);

  engine::ModelBackend backend(ckpt.params);
  auto g = c.oprm.generation(vocab, c.run.seed, c.run.workers);
  g.max_new_tokens = max_new;
  engine::GenerationResult r;
  switch (c.oprm.variant) {
    case Variant::oprm: r = engine::oprm_generate(backend, parts, g); break;
    case Variant::summ: r = engine::summ_generate(backend, parts, g); break;
    case Variant::cc: r = engine::cc_generate(backend, parts, c.oprm.top_k, g); break;
  }
  timer.lap("generate");

  std::ostringstream answer;
  for (std::size_t i = 0; i < r.tokens.size(); ++i) answer << (i ? " " : "") << r.tokens[i];
  log << "answer: " << answer.str() << "\nselected:";
  for (auto s : r.trace.selected) log << ' ' << s;
  log << '\n';
  artifact(m, root, "answer.txt", [&](std::ostream& o) { o << answer.str() << '\n'; });
  artifact(m, root, "trace.csv", [&](std::ostream& o) { r.trace.write_csv(o); });
  artifact(m, root, "trace.svg", [&](std::ostream& o) {
    std::vector<std::string> labels;
    std::vector<double> ent;
    for (const auto& ch : r.trace.chunks) {
      labels.push_back(std::to_string(ch.index) + (ch.selected ? "*" : ""));
      ent.push_back(ch.entropy_bits);
    }
    bar_chart(o, {"Next-token entropy per chunk (* selected)", "chunk", "entropy (bits)"}, labels, ent);
  });
  write_manifest(root / "manifest.json", m);
}

void cmd_gen_data(const ExperimentConfig& c, std::ostream& log) {
  const auto& d = c.data;
  const Vocab vocab = d.protocol == ar::Protocol::controlled ? Vocab::controlled(d.n_keys, d.n_values) : Vocab::symbolic();
  ar::EvalConfig ec;
  ec.grid = d.grid;
  ec.context_len = d.context_len;
  ec.contexts_per_m = d.samples_per_m;
  ec.seeds = {c.run.seed};
  ec.protocol = d.protocol;
  ec.validate(vocab);

  const fs::path root = out_dir(c);
  DirectoryLock lock(root);
  RunManifest m = start_manifest("gen-data", c);
  StageTimer timer(m);
  std::vector<ar::ARSample> samples;
  for (int mm : d.grid)
    for (int i = 0; i < d.samples_per_m; ++i)
      samples.push_back(ar::eval_sample(ec, vocab, mm, ar::context_seed(c.run.seed, mm, i)));
  artifact(m, root, "dataset.jsonl", [&](std::ostream& o) { ar::write_dataset(o, samples); });
  log << "wrote " << samples.size() << " samples\n";
  timer.lap("generate");
  write_manifest(root / "manifest.json", m);
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Overflow prevention for recurrent models: training, evaluation and chunked inference"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolVersion));

  struct Flags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<int> workers;
    std::optional<int> chunk_size;
    std::optional<std::string> criterion;
    std::optional<std::string> idk_filter;
    std::optional<std::string> out;
    std::vector<std::string> sets;
  } flags;

  using Command = void (*)(const ExperimentConfig&, std::ostream&);
  const std::vector<std::tuple<std::string, std::string, Command>> commands{
      {"train", "Train a recall model (or a grid of them)", cmd_train},
      {"eval", "Accuracy curves, capacity, histograms and length sweeps", cmd_eval},
      {"bench", "Prefill and decode timing, vanilla vs chunked", cmd_bench},
      {"oprm-run", "Generate for one prompt and dump the selection trace", cmd_oprm_run},
      {"gen-data", "Write recall samples as line-delimited records", cmd_gen_data},
  };
  std::vector<std::pair<CLI::App*, Command>> subs;
  for (const auto& [name, help, fn] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", flags.config, "Experiment config file")->check(CLI::ExistingFile);
    sub->add_option("--seed", flags.seed, "Global seed");
    sub->add_option("--workers", flags.workers, "Worker threads (default: OPRM_WORKERS or 1)")->check(CLI::PositiveNumber);
    sub->add_option("--chunk-size", flags.chunk_size, "Chunk length L")->check(CLI::PositiveNumber);
    sub->add_option("--criterion", flags.criterion, "Chunk selection criterion")
        ->check(CLI::IsMember({"entropy", "likelihood", "random", "index"}));
    sub->add_option("--idk-filter", flags.idk_filter, "Drop chunks that answer with the error token")
        ->check(CLI::IsMember({"on", "off"}));
    sub->add_option("--out", flags.out, "Output directory");
    sub->add_option("--set", flags.sets, "Override a config entry: section.key=value");
    subs.emplace_back(sub, fn);
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  }

  try {
    RawConfig raw = flags.config.empty() ? RawConfig{} : load_config_file(flags.config);
    for (const auto& s : flags.sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos || s.find('.') > eq) throw UsageError("--set expects section.key=value, got '" + s + "'");
      std::istringstream words(s.substr(eq + 1));
      std::vector<std::string> values{std::istream_iterator<std::string>(words), {}};
      raw[s.substr(0, eq)] = values;
    }
    if (flags.seed) raw["run.seed"] = {std::to_string(*flags.seed)};
    if (flags.workers) raw["run.workers"] = {std::to_string(*flags.workers)};
    if (flags.out) raw["run.out"] = {*flags.out};
    if (flags.chunk_size) raw["oprm.chunk_size"] = {std::to_string(*flags.chunk_size)};
    if (flags.criterion) raw["oprm.criterion"] = {*flags.criterion};
    if (flags.idk_filter) raw["oprm.idk_filter"] = {*flags.idk_filter};

    for (const auto& [sub, fn] : subs) {
      if (!sub->parsed()) continue;
      const std::vector<std::string> required =
          sub->get_name() == "train" ? std::vector<std::string>{"train.steps"} : std::vector<std::string>{};
      fn(bind_config(raw, required), out);
    }
    return kExitOk;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
}

}  // namespace oprm::io
