// Runs the acceptance checks and prints one PASS/FAIL line per criterion.
#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "oprm/ar/eval.hpp"
#include "oprm/ar/stats.hpp"
#include "oprm/ar/train.hpp"
#include "oprm/core/backprop.hpp"
#include "oprm/core/forward.hpp"
#include "oprm/engine/backend.hpp"
#include "oprm/engine/oprm.hpp"
#include "oprm/io/commands.hpp"
#include "oprm/io/table.hpp"

namespace fs = std::filesystem;
using namespace oprm;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v, int digits = 3) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(digits);
  os << v;
  return os.str();
}

std::string sci(double v) {
  std::ostringstream os;
  os.precision(2);
  os << std::scientific << v;
  return os.str();
}

std::string join(const std::vector<double>& v) {
  std::string s;
  for (double x : v) s += (s.empty() ? "" : " ") + fmt(x, 2);
  return s;
}

// ---- 1: gradient oracle ----------------------------------------------------

// Max over all scalars of |a - b| / max(|a|, |b|, floor).
double max_relative_error(const ModelParams& a, const ModelParams& b, double floor) {
  const auto ta = a.tensors();
  const auto tb = b.tensors();
  double worst = 0.0;
  for (std::size_t i = 0; i < ta.size(); ++i)
    for (std::size_t j = 0; j < ta[i].data.size(); ++j) {
      const double x = ta[i].data[j];
      const double y = tb[i].data[j];
      worst = std::max(worst, std::abs(x - y) / std::max({std::abs(x), std::abs(y), floor}));
    }
  return worst;
}

Outcome gradient_oracle() {
  const auto t0 = Clock::now();
  const ModelParams p = ModelParams::init({16, 8, 2, 4, 2}, 2024);
  std::mt19937_64 rng(7);
  auto tok = [&] { return static_cast<TokenId>(rng() % 16); };
  std::vector<TrainingExample> batch(2);
  for (auto& ex : batch) {
    for (int i = 0; i < 24; ++i) ex.tokens.push_back(tok());
    ex.answers = {{7, tok()}, {23, tok()}};
    ex.branches = {{{tok(), tok()}, tok()}};
  }
  const auto analytic = loss_and_grads(batch, p);
  const auto numeric = finite_diff_grad(batch, p, 1e-3);
  const double worst = max_relative_error(analytic.grads, numeric, 1e-6);
  const double secs = seconds_since(t0);
  return {worst <= 1e-3 && secs < 60, "max relative error " + sci(worst) + ", " + fmt(secs, 1) + " s"};
}

// ---- 2: selection conformance ------------------------------------------

std::size_t oracle_select(const std::vector<double>& ent, const std::vector<std::optional<double>>& lik,
                          const std::vector<bool>& idk, bool use_lik) {
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < idk.size(); ++i)
    if (!idk[i]) kept.push_back(i);
  if (kept.empty()) return 0;
  std::size_t best = kept[0];
  for (std::size_t i : kept) {
    if (use_lik ? *lik[i] > *lik[best] : ent[i] < ent[best]) best = i;
  }
  return best;
}

Outcome conformance(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0, 8);
  std::size_t checks = 0, agree = 0;

  auto run = [&](const std::vector<double>& ent, const std::vector<std::optional<double>>& lik,
                 const std::vector<bool>& idk) {
    std::vector<engine::ChunkScore> scores(ent.size());
    for (std::size_t i = 0; i < ent.size(); ++i) {
      scores[i].entropy_bits = ent[i];
      scores[i].query_loglik = lik[i];
      scores[i].is_idk = idk[i];
    }
    const auto kept = engine::idk_filter(scores);
    std::vector<std::size_t> want_kept;
    for (std::size_t i = 0; i < idk.size(); ++i)
      if (!idk[i]) want_kept.push_back(i);
    if (want_kept.empty()) want_kept = {0};
    ++checks;
    agree += kept == want_kept;
    for (bool use_lik : {false, true}) {
      const auto got = engine::select_chunk(scores, kept, use_lik ? engine::Criterion::max_query_likelihood
                                                                  : engine::Criterion::min_entropy, rng);
      ++checks;
      agree += got == oracle_select(ent, lik, idk, use_lik);
    }
  };

  // Random score vectors, with deliberate ties and -inf likelihoods.
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t b = 1 + rng() % 10;
    std::vector<double> ent(b);
    std::vector<std::optional<double>> lik(b);
    std::vector<bool> idk(b);
    for (std::size_t i = 0; i < b; ++i) {
      ent[i] = rng() % 4 == 0 ? 1.0 : u(rng);
      lik[i] = rng() % 5 == 0 ? -INFINITY : (rng() % 4 == 0 ? -2.0 : -u(rng));
      idk[i] = rng() % 3 == 0;
    }
    run(ent, lik, idk);
  }
  // Every IDK pattern up to b = 10.
  for (std::size_t b = 1; b <= 10; ++b)
    for (std::uint32_t mask = 0; mask < (1u << b); ++mask) {
      std::vector<double> ent(b);
      std::vector<std::optional<double>> lik(b);
      std::vector<bool> idk(b);
      for (std::size_t i = 0; i < b; ++i) {
        ent[i] = std::floor(u(rng));
        lik[i] = -std::floor(u(rng));
        idk[i] = (mask >> i) & 1u;
      }
      run(ent, lik, idk);
    }

  // b = 1 reduces to vanilla generation on a real model.
  const Vocab vocab = Vocab::controlled(16, 8);
  const ModelParams p = ModelParams::init({vocab.size, 16, 4, 4, 2}, seed);
  engine::ModelBackend backend(p);
  int same = 0, prompts = 0;
  for (int trial = 0; trial < 50; ++trial) {
    engine::PromptParts parts;
    std::uniform_int_distribution<TokenId> tok(vocab.key_range.first, vocab.value_range.end() - 1);
    const int len = 1 + static_cast<int>(rng() % 40);
    for (int i = 0; i < len; ++i) parts.context.push_back(tok(rng));
    parts.suffix = {vocab.query_marker, tok(rng)};
    parts.query_begin = 1;
    parts.query_end = 2;
    engine::GenerationConfig g;
    g.chunk_len = 40;
    g.max_new_tokens = 8;
    g.pad_token = vocab.pad_token;
    if (trial % 2) g.decoding = {engine::Decoding::Kind::temperature, 0.8, static_cast<std::uint64_t>(trial)};
    engine::PromptParts padded = parts;
    padded.context.resize(40, vocab.pad_token);
    ++prompts;
    same += engine::oprm_generate(backend, parts, g).tokens == engine::vanilla_generate(backend, padded, g);
  }
  return {agree == checks && same == prompts, std::to_string(agree) + "/" + std::to_string(checks) +
                                                  " selection checks, b=1 equals vanilla on " + std::to_string(same) +
                                                  "/" + std::to_string(prompts) + " prompts"};
}

// ---- shared trained models -------------------------------------------------

const std::vector<int> kGrid{1, 2, 4, 8, 16, 32};

int g_idk_queries = 4;

ar::TrainConfig recipe(int d, int d_state, std::uint64_t seed, int steps) {
  ar::TrainConfig t;
  t.d = d;
  t.d_state = d_state;
  t.n_keys = 64;
  t.n_values = 16;
  t.context_len = 96;
  t.m_blend = kGrid;
  t.blend_rounds = 2;
  t.steps = steps;
  t.lr = 3e-3;
  t.weight_decay = 0.1;
  t.warmup_steps = 200;
  t.min_lr_ratio = 0.1;
  t.clip_norm = 1.0;
  t.seed = seed;
  t.idk_queries = g_idk_queries;
  return t;
}

struct Trained {
  ar::TrainConfig config;
  Checkpoint ckpt;
  double train_seconds = 0;
};

Trained train(const ar::TrainConfig& tc, const fs::path& out, std::ostream& log) {
  const auto t0 = Clock::now();
  const int every = std::max(1, tc.steps / 5);
  ar::TrainHooks hooks;
  hooks.on_step = [&](const ar::LossRecord& r) {
    if (r.step % every == 0) log << "    step " << r.step << " loss " << fmt(r.loss) << '\n' << std::flush;
  };
  log << "  training d=" << tc.d << " d_state=" << tc.d_state << " seed=" << tc.seed << " for " << tc.steps
      << " steps\n";
  auto r = ar::train_controlled(tc, hooks);
  Trained t{tc, std::move(r.final), seconds_since(t0)};
  if (!out.empty()) {
    fs::create_directories(out);
    save_checkpoint(out / ("d" + std::to_string(tc.d) + "_s" + std::to_string(tc.d_state) + "_seed" +
                           std::to_string(tc.seed) + ".ckpt"),
                    t.ckpt);
  }
  return t;
}

engine::GenerationConfig gen_config(const Vocab& vocab, int chunk_len, bool idk_filter = false) {
  engine::GenerationConfig g;
  g.chunk_len = chunk_len;
  g.pad_token = vocab.pad_token;
  g.error_tokens = {vocab.error_token};
  g.idk_filter = idk_filter;
  g.idk_instruction = {vocab.idk_instruction};
  return g;
}

ar::EvalConfig eval_config(int contexts, int workers) {
  ar::EvalConfig e;
  e.grid = kGrid;
  e.context_len = 96;
  e.contexts_per_m = contexts;
  e.seeds = {12345};
  e.workers = workers;
  return e;
}

// ---- 6: numeric primitives -------------------------------------------------

Outcome numeric_primitives() {
  bool ok = true;
  std::string why;
  for (std::size_t v : {2u, 16u, 100u, 4096u}) {
    const double h = engine::entropy_score(OutputDistribution(std::vector<double>(v, 1.0 / v)));
    if (std::abs(h - std::log2(static_cast<double>(v))) > 1e-9) ok = false, why += " uniform entropy off at |V|=" + std::to_string(v);
  }
  std::vector<double> onehot(50, 0.0);
  onehot[17] = 1.0;
  if (engine::entropy_score(OutputDistribution(onehot)) != 0.0) ok = false, why += " one-hot entropy nonzero";

  // A backend that puts zero mass on token 3 everywhere.
  struct ZeroOn3 final : engine::Backend {
    struct S final : engine::SessionState {
      std::unique_ptr<SessionState> clone() const override { return std::make_unique<S>(*this); }
    };
    std::size_t vocab_size() const override { return 5; }
    engine::PrefillResult prefill(std::span<const TokenId>) const override { return {std::make_unique<S>(), dist()}; }
    OutputDistribution step(engine::SessionState&, TokenId) const override { return dist(); }
    static OutputDistribution dist() { return OutputDistribution({0.25, 0.25, 0.25, 0.0, 0.25}); }
  } zero;
  const std::vector<TokenId> chunk{1, 2}, suffix{0, 3, 1};
  const double ll = engine::query_log_likelihood(zero, {}, chunk, suffix, 1, 3);
  if (!(std::isinf(ll) && ll < 0)) ok = false, why += " zero-probability likelihood is not -inf";

  std::mt19937_64 rng(6);
  int round_trips = 0;
  for (int i = 0; i < 1000; ++i) {
    const int len = 1 + static_cast<int>(rng() % 500);
    const int chunk_len = 1 + static_cast<int>(rng() % 64);
    std::vector<TokenId> c(len);
    for (auto& t : c) t = static_cast<TokenId>(1 + rng() % 30);
    const auto set = engine::make_chunks(c, chunk_len, 0);
    round_trips += set.reconstruct() == c && set.count() == static_cast<std::size_t>((len + chunk_len - 1) / chunk_len);
  }
  if (round_trips != 1000) ok = false, why += " chunk round trips " + std::to_string(round_trips) + "/1000";
  return {ok, ok ? "entropies exact, -inf likelihood, 1000/1000 chunk round trips" : why};
}

// ---- 7: streaming consistency ---------------------------------------------

Outcome streaming() {
  const ModelParams p = ModelParams::init({40, 16, 4, 4, 2}, 77);
  std::mt19937_64 rng(8);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t len = 2 + rng() % 120;
    const std::size_t cut = 1 + rng() % (len - 1);
    std::vector<TokenId> seq(len);
    for (auto& t : seq) t = static_cast<TokenId>(rng() % 40);
    const auto whole = model_prefill(p, seq);
    auto part = model_prefill(p, std::span(seq).first(cut));
    OutputDistribution d = part.dist;
    for (std::size_t i = cut; i < len; ++i) d = model_step(p, part.state, seq[i]);
    worst = std::max(worst, whole.state.max_abs_diff(part.state));
    for (std::size_t v = 0; v < d.size(); ++v) worst = std::max(worst, std::abs(d[v] - whole.dist[v]));
  }
  return {worst <= 1e-10, "max elementwise difference " + sci(worst)};
}

// ---- 8: efficiency trend ---------------------------------------------------

Outcome efficiency(int workers) {
  const Vocab vocab = Vocab::controlled(64, 16);
  const ModelParams p = ModelParams::init({vocab.size, 64, 4, 4, 2}, 3);
  engine::ModelBackend backend(p);
  const int L = 128;
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<TokenId> tok(vocab.key_range.first, vocab.value_range.end() - 1);
  auto parts_for = [&](int b) {
    engine::PromptParts parts;
    parts.context.resize(static_cast<std::size_t>(b) * L);
    for (auto& t : parts.context) t = tok(rng);
    parts.suffix = {vocab.query_marker, vocab.key_range.first};
    parts.query_begin = 1;
    parts.query_end = 2;
    return parts;
  };
  auto best_of = [](int reps, auto&& f) {
    double best = INFINITY;
    for (int r = 0; r < reps; ++r) {
      const auto t0 = Clock::now();
      f();
      best = std::min(best, seconds_since(t0));
    }
    return best;
  };

  // Rounds sweep every b in turn and each b keeps its fastest round, so a
  // burst of machine noise cannot bend one end of the curve.
  constexpr int kMaxChunks = 32, kRounds = 7, kDecodeSteps = 20;
  std::vector<engine::PromptParts> prompts;
  std::vector<std::unique_ptr<engine::SessionState>> states;
  std::vector<double> bs, prefill(kMaxChunks, INFINITY), decode(kMaxChunks, INFINITY);
  for (int b = 1; b <= kMaxChunks; ++b) {
    bs.push_back(b);
    prompts.push_back(parts_for(b));
    states.push_back(backend.prefill(prompts.back().context).state);
  }
  auto g1 = gen_config(vocab, L);
  g1.workers = 1;
  g1.max_new_tokens = 1;
  for (int r = 0; r < kRounds; ++r)
    for (int i = 0; i < kMaxChunks; ++i) {
      prefill[i] = std::min(prefill[i], best_of(1, [&] { engine::oprm_generate(backend, prompts[i], g1); }));
      // Decode cost measured directly from the retained state.
      decode[i] = std::min(decode[i], best_of(1, [&] {
                                        auto s = states[i]->clone();
                                        for (int k = 0; k < kDecodeSteps; ++k)
                                          backend.step(*s, vocab.value_range.first);
                                      }) / kDecodeSteps);
    }
  const auto fit = ar::fit_line(bs, prefill);
  const auto dfit = ar::fit_line(bs, decode);
  double mean_decode = 0;
  for (double d : decode) mean_decode += d / decode.size();
  // "Within noise": the fitted change across the whole b range is below 25% of a step.
  const bool flat_decode = std::abs(dfit.slope) * 31 <= 0.25 * mean_decode;

  const auto big = parts_for(32);
  auto g = gen_config(vocab, L);
  g.workers = std::max(4, workers);
  g.max_new_tokens = 1;
  const double chunked = best_of(3, [&] { engine::oprm_generate(backend, big, g); });
  const double mono = best_of(3, [&] { engine::vanilla_generate(backend, big, g); });
  const bool parallel_ok = chunked <= 1.1 * mono;
  return {fit.r2 >= 0.95 && flat_decode && parallel_ok,
          "prefill R^2 " + fmt(fit.r2, 4) + ", decode slope " + fmt(dfit.slope * 1e9, 1) + " ns/chunk vs step " +
              fmt(mean_decode * 1e6, 1) + " us, chunked(" + std::to_string(g.workers) + " workers)/monolithic " +
              fmt(chunked / mono, 3) + " on " + std::to_string(std::thread::hardware_concurrency()) + " core(s)"};
}

// ---- 9: determinism ----------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

Outcome determinism(const fs::path& scratch) {
  fs::remove_all(scratch);
  fs::create_directories(scratch);
  const auto cfg = scratch / "exp.ini";
  std::ofstream(cfg) << "[model]\nd = 8\nd_state = 2\nn_keys = 8\nn_values = 8\n"
                        "[train]\ncontext_len = 24\nm_blend = 1 2 4\nsteps = 40\nlr = 0.01\ncheckpoint_every = 20\n"
                        "[eval]\ngrid = 1 2 4\ncontext_len = 24\ncontexts_per_m = 5\nlengths = 24 96\n"
                        "[data]\nn_keys = 8\nn_values = 8\ncontext_len = 24\ngrid = 1 4\n";
  std::ostringstream sink;
  auto run = [&](std::vector<std::string> args) { return io::run_cli(args, sink, sink); };
  int failures = 0;
  for (const char* tag : {"a", "b"}) {
    const auto dir = scratch / tag;
    failures += run({"train", "--config", cfg.string(), "--seed", "3", "--out", (dir / "train").string()}) != 0;
    failures += run({"eval", "--config", cfg.string(), "--seed", "3", "--chunk-size", "6", "--out",
                     (dir / "eval").string(), "--set", "eval.checkpoints=" + (dir / "train" / "model.ckpt").string()}) != 0;
    failures += run({"gen-data", "--config", cfg.string(), "--seed", "3", "--out", (dir / "data").string()}) != 0;
  }
  if (failures) return {false, std::to_string(failures) + " command(s) failed"};
  int compared = 0, differ = 0;
  for (const auto& e : fs::recursive_directory_iterator(scratch / "a")) {
    if (!e.is_regular_file() || e.path().filename() == "manifest.json") continue;
    const auto rel = fs::relative(e.path(), scratch / "a");
    ++compared;
    differ += slurp(e.path()) != slurp(scratch / "b" / rel);
  }
  fs::remove_all(scratch);
  return {differ == 0 && compared > 0,
          std::to_string(compared - differ) + "/" + std::to_string(compared) + " data files byte-identical"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  std::vector<int> only;
  std::string out = "acceptance_out";
  int steps = 12000, capacity_steps = 3000, contexts = 100, workers = 1;
  app.add_option("--only", only, "Run only these criteria (1-10)");
  app.add_option("--out", out, "Directory for trained models and curves");
  app.add_option("--steps", steps, "Training steps for the overflow model");
  app.add_option("--capacity-steps", capacity_steps, "Training steps per capacity model");
  app.add_option("--contexts", contexts, "Evaluation contexts per M");
  app.add_option("--idk-queries", g_idk_queries, "Instructed present/absent queries per training context");
  app.add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber);
  CLI11_PARSE(app, argc, argv);

  const std::set<int> selected(only.begin(), only.end());
  auto want = [&](int c) { return selected.empty() || selected.contains(c); };
  const fs::path root = out;
  fs::create_directories(root);
  std::ostream& log = std::cerr;

  std::map<int, Outcome> results;
  auto record = [&](int id, const std::string& name, Outcome o) {
    std::cout << "criterion " << id << " [" << name << "]: " << (o.pass ? "PASS" : "FAIL") << " - " << o.detail
              << std::endl;
    results[id] = std::move(o);
  };
  auto guarded = [&](int id, const std::string& name, auto&& fn) {
    if (!want(id)) return;
    try {
      record(id, name, fn());
    } catch (const std::exception& e) {
      record(id, name, {false, std::string("error: ") + e.what()});
    }
  };

  guarded(1, "gradient oracle", gradient_oracle);
  guarded(2, "selection conformance", [] { return conformance(11); });

  // Criteria 3, 4 and 10 share one trained model.
  std::optional<Trained> main_model;
  std::optional<ar::ARCurve> baseline;
  double eval_seconds = 0;
  if (want(3) || want(4) || want(10)) {
    try {
      main_model = train(recipe(64, 4, 1, steps), root / "models", log);
      const auto t0 = Clock::now();
      engine::ModelBackend backend(main_model->ckpt.params);
      const Vocab vocab = main_model->config.vocab();
      auto r = ar::eval_ar_curve(ar::vanilla_fn(backend, gen_config(vocab, 1)), vocab, eval_config(contexts, workers));
      baseline = r.curve;
      eval_seconds = seconds_since(t0);
      std::ofstream csv(root / "overflow_curve.csv");
      ar::write_curves_csv(csv, {{"baseline", *baseline}});
      std::ofstream hist(root / "positional_histogram.csv");
      ar::write_histogram_csv(hist, ar::positional_histogram(r.outcomes));
    } catch (const std::exception& e) {
      log << "overflow model failed: " << e.what() << '\n';
    }
  }

  guarded(3, "overflow reproduction", [&]() -> Outcome {
    if (!baseline) return {false, "model unavailable"};
    std::vector<double> ms(kGrid.begin(), kGrid.end());
    const double rho = ar::spearman(ms, baseline->accuracy);
    bool small_ok = true;
    for (std::size_t i = 0; i < kGrid.size(); ++i)
      if (kGrid[i] <= 4 && baseline->accuracy[i] < 0.9) small_ok = false;
    const double total = main_model->train_seconds + eval_seconds;
    return {small_ok && rho < -0.5 && total <= 1800,
            "accuracy by M {" + join(baseline->accuracy) + "}, Spearman " + fmt(rho) + ", train+eval " +
                fmt(total / 60, 1) + " min"};
  });

  guarded(4, "chunked flatness", [&]() -> Outcome {
    if (!baseline) return {false, "model unavailable"};
    // Chunk length: at the largest M each chunk holds half the threshold
    // capacity. A chunk filled to capacity already sits at 0.9 accuracy.
    const int cap = static_cast<int>(
        ar::capacity_report(*baseline, kGrid.back(), 0, 0, ar::CapacityMode::threshold).capacity);
    const int spacing = 96 / kGrid.back();
    const int chunk_len = spacing * std::max(1, cap / 2);
    engine::ModelBackend backend(main_model->ckpt.params);
    const Vocab vocab = main_model->config.vocab();
    const auto r = ar::eval_ar_curve(ar::oprm_fn(backend, gen_config(vocab, chunk_len, true)), vocab,
                                     eval_config(contexts, workers));
    std::ofstream csv(root / "chunked_curve.csv");
    ar::write_curves_csv(csv, {{"baseline", *baseline}, {"oprm", r.curve}});
    const double gain = r.curve.accuracy.back() - baseline->accuracy.back();
    const double drop = r.curve.accuracy.front() - r.curve.accuracy.back();
    return {gain >= 0.2 && drop <= 0.1, "L=" + std::to_string(chunk_len) + ", chunked accuracy {" +
                                            join(r.curve.accuracy) + "}, gain at M=32 " + fmt(gain) + ", drop " +
                                            fmt(drop)};
  });

  guarded(5, "capacity monotonicity", [&]() -> Outcome {
    std::map<std::pair<int, int>, double> cap;
    for (auto [d, s] : {std::pair{64, 4}, std::pair{16, 4}, std::pair{64, 1}}) {
      double sum = 0;
      for (std::uint64_t seed : {1, 2, 3}) {
        const auto t = train(recipe(d, s, seed, capacity_steps), root / "capacity_models", log);
        engine::ModelBackend backend(t.ckpt.params);
        const Vocab vocab = t.config.vocab();
        const auto r = ar::eval_ar_curve(ar::vanilla_fn(backend, gen_config(vocab, 1)), vocab,
                                         eval_config(std::max(10, contexts / 4), workers));
        sum += ar::capacity_report(r.curve, kGrid.back(), d, s).capacity;
      }
      cap[{d, s}] = sum / 3;
    }
    const double big = cap[{64, 4}], narrow = cap[{16, 4}], small_state = cap[{64, 1}];
    return {big >= narrow && big >= small_state, "mean capacity d64/s4 " + fmt(big, 2) + ", d16/s4 " +
                                                     fmt(narrow, 2) + ", d64/s1 " + fmt(small_state, 2)};
  });

  guarded(6, "numeric primitives", numeric_primitives);
  guarded(7, "streaming consistency", streaming);
  guarded(8, "efficiency trend", [&] { return efficiency(workers); });
  guarded(9, "determinism", [&] { return determinism(root / "determinism"); });

  guarded(10, "length insensitivity", [&]() -> Outcome {
    if (!main_model) return {false, "model unavailable"};
    engine::ModelBackend backend(main_model->ckpt.params);
    const Vocab vocab = main_model->config.vocab();
    const auto curves = ar::length_sensitivity_sweep(ar::vanilla_fn(backend, gen_config(vocab, 1)), vocab,
                                                     eval_config(contexts, workers), {96, 384});
    std::ofstream csv(root / "length_sweep.csv");
    ar::write_curves_csv(csv, {{"N=96", curves[0]}, {"N=384", curves[1]}});
    double worst = 0;
    for (std::size_t i = 0; i < kGrid.size(); ++i)
      worst = std::max(worst, std::abs(curves[0].accuracy[i] - curves[1].accuracy[i]));
    return {worst <= 0.15, "N=96 {" + join(curves[0].accuracy) + "}, N=384 {" + join(curves[1].accuracy) +
                               "}, max difference " + fmt(worst)};
  });

  int failed = 0;
  for (const auto& [id, o] : results) failed += !o.pass;
  std::cout << (failed ? std::to_string(failed) + " criterion(s) failed" : std::string("all selected criteria passed"))
            << std::endl;
  return failed ? 1 : 0;
}
