#include "oprm/io/config.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "oprm/errors.hpp"
#include "oprm/io/table.hpp"

namespace oprm::io {

RawConfig parse_config(std::istream& in) {
  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigINI().from_config(in);
  } catch (const CLI::Error& e) {
    throw UsageError(std::string("config: ") + e.what());
  }
  RawConfig raw;
  for (const auto& it : items) {
    if (it.name == "++" || it.name == "--") continue;
    if (it.parents.size() > 1) throw UsageError("config: nested section in '" + it.fullname() + "'");
    const std::string key = (it.parents.empty() ? std::string("run") : it.parents[0]) + "." + it.name;
    if (raw.contains(key)) throw UsageError("config: duplicate key '" + key + "'");
    raw[key] = it.inputs;
  }
  return raw;
}

RawConfig load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config file " + path.string());
  return parse_config(in);
}

int default_workers() {
  const char* env = std::getenv("OPRM_WORKERS");
  if (!env || !*env) return 1;
  int v = 0;
  const auto [p, ec] = std::from_chars(env, env + std::strlen(env), v);
  if (ec != std::errc() || *p != '\0' || v < 1) throw UsageError(std::string("OPRM_WORKERS must be a positive integer, got '") + env + "'");
  return v;
}

namespace {

template <class T>
T parse_number(const std::string& key, const std::string& s) {
  T v{};
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw UsageError("config: '" + key + "' expects a number, got '" + s + "'");
  return v;
}

const std::string& single(const std::string& key, const std::vector<std::string>& v) {
  if (v.size() != 1) throw UsageError("config: '" + key + "' expects a single value");
  return v[0];
}

bool parse_bool(const std::string& key, const std::string& s) {
  if (s == "on" || s == "true" || s == "1" || s == "yes") return true;
  if (s == "off" || s == "false" || s == "0" || s == "no") return false;
  throw UsageError("config: '" + key + "' expects on/off, got '" + s + "'");
}

template <class T>
std::string show(const T& v) {
  if constexpr (std::is_same_v<T, bool>) {
    return v ? "on" : "off";
  } else if constexpr (std::is_floating_point_v<T>) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
  } else if constexpr (std::is_same_v<T, std::string>) {
    return v;
  } else {
    return std::to_string(v);
  }
}

template <class T>
std::string show_list(const std::vector<T>& v) {
  std::string out;
  for (const auto& x : v) out += (out.empty() ? "" : " ") + show(x);
  return out;
}

struct Field {
  std::function<void(const std::string& key, const std::vector<std::string>&)> set;
  std::function<std::string()> get;
};

template <class T>
Field scalar(T& ref) {
  return {[&ref](const std::string& k, const std::vector<std::string>& v) {
            const std::string& s = single(k, v);
            if constexpr (std::is_same_v<T, bool>) ref = parse_bool(k, s);
            else if constexpr (std::is_same_v<T, std::string>) ref = s;
            else ref = parse_number<T>(k, s);
          },
          [&ref] { return show(ref); }};
}

template <class T>
Field list(std::vector<T>& ref) {
  return {[&ref](const std::string& k, const std::vector<std::string>& v) {
            ref.clear();
            for (const auto& s : v) {
              if constexpr (std::is_same_v<T, std::string>) ref.push_back(s);
              else ref.push_back(parse_number<T>(k, s));
            }
          },
          [&ref] { return show_list(ref); }};
}

template <class T>
Field optional_index(std::optional<T>& ref) {
  return {[&ref](const std::string& k, const std::vector<std::string>& v) { ref = parse_number<T>(k, single(k, v)); },
          [&ref] { return ref ? show(*ref) : std::string("auto"); }};
}

template <class E>
Field choice(E& ref, std::vector<std::pair<std::string, E>> names) {
  return {[&ref, names](const std::string& k, const std::vector<std::string>& v) {
            const std::string& s = single(k, v);
            std::string options;
            for (const auto& [n, e] : names) {
              if (n == s) {
                ref = e;
                return;
              }
              options += (options.empty() ? "" : ", ") + n;
            }
            throw UsageError("config: '" + k + "' must be one of {" + options + "}, got '" + s + "'");
          },
          [&ref, names] {
            for (const auto& [n, e] : names)
              if (e == ref) return n;
            return std::string("?");
          }};
}

std::map<std::string, Field> fields(ExperimentConfig& c) {
  using engine::Criterion;
  auto& t = c.train.config;
  auto& e = c.eval;
  auto& o = c.oprm;
  auto& b = c.bench;
  auto& d = c.data;
  auto& p = c.prompt;
  return {
      {"run.seed", scalar(c.run.seed)},
      {"run.workers", scalar(c.run.workers)},
      {"run.out", scalar(c.run.out)},

      {"model.d", scalar(t.d)},
      {"model.d_state", scalar(t.d_state)},
      {"model.n_layers", scalar(t.n_layers)},
      {"model.conv_width", scalar(t.conv_width)},
      {"model.n_keys", scalar(t.n_keys)},
      {"model.n_values", scalar(t.n_values)},

      {"train.context_len", scalar(t.context_len)},
      {"train.m_blend", list(t.m_blend)},
      {"train.blend_rounds", scalar(t.blend_rounds)},
      {"train.steps", scalar(t.steps)},
      {"train.lr", scalar(t.lr)},
      {"train.weight_decay", scalar(t.weight_decay)},
      {"train.warmup_steps", scalar(t.warmup_steps)},
      {"train.min_lr_ratio", scalar(t.min_lr_ratio)},
      {"train.clip_norm", scalar(t.clip_norm)},
      {"train.checkpoint_every", scalar(t.checkpoint_every)},
      {"train.idk_queries", scalar(t.idk_queries)},
      {"train.grid_d", list(c.train.grid_d)},
      {"train.grid_d_state", list(c.train.grid_d_state)},
      {"train.seeds", list(c.train.seeds)},

      {"oprm.chunk_size", scalar(o.chunk_size)},
      {"oprm.criterion", choice(o.criterion, {{"entropy", Criterion::min_entropy},
                                              {"likelihood", Criterion::max_query_likelihood},
                                              {"random", Criterion::random},
                                              {"index", Criterion::fixed_index}})},
      {"oprm.idk_filter", scalar(o.idk_filter)},
      {"oprm.fixed_index", scalar(o.fixed_index)},
      {"oprm.decoding", choice(o.decoding, {{"greedy", engine::Decoding::Kind::greedy},
                                            {"temperature", engine::Decoding::Kind::temperature}})},
      {"oprm.temperature", scalar(o.temperature)},
      {"oprm.variant", choice(o.variant, {{"oprm", Variant::oprm}, {"summ", Variant::summ}, {"cc", Variant::cc}})},
      {"oprm.top_k", scalar(o.top_k)},

      {"eval.checkpoints", list(e.checkpoints)},
      {"eval.modes", list(e.modes)},
      {"eval.grid", list(e.eval.grid)},
      {"eval.context_len", scalar(e.eval.context_len)},
      {"eval.contexts_per_m", scalar(e.eval.contexts_per_m)},
      {"eval.seeds", list(e.eval.seeds)},
      {"eval.max_queries", scalar(e.eval.max_queries)},
      {"eval.lengths", list(e.lengths)},
      {"eval.histogram", scalar(e.histogram)},
      {"eval.capacity_mode", choice(e.capacity_mode, {{"expected", ar::CapacityMode::expected_facts},
                                                      {"threshold", ar::CapacityMode::threshold}})},
      {"eval.m_trained", scalar(e.m_trained)},
      {"eval.plots", scalar(e.plots)},

      {"bench.checkpoint", scalar(b.checkpoint)},
      {"bench.d", scalar(b.d)},
      {"bench.d_state", scalar(b.d_state)},
      {"bench.vocab_keys", scalar(b.vocab_keys)},
      {"bench.vocab_values", scalar(b.vocab_values)},
      {"bench.chunk_len", scalar(b.chunk_len)},
      {"bench.chunks", list(b.chunks)},
      {"bench.decode_tokens", scalar(b.decode_tokens)},
      {"bench.repeats", scalar(b.repeats)},

      {"data.protocol", choice(d.protocol, {{"controlled", ar::Protocol::controlled},
                                            {"zero_shot", ar::Protocol::zero_shot}})},
      {"data.grid", list(d.grid)},
      {"data.context_len", scalar(d.context_len)},
      {"data.samples_per_m", scalar(d.samples_per_m)},
      {"data.n_keys", scalar(d.n_keys)},
      {"data.n_values", scalar(d.n_values)},

      {"prompt.checkpoint", scalar(p.checkpoint)},
      {"prompt.prefix", list(p.prefix)},
      {"prompt.context", list(p.context)},
      {"prompt.suffix", list(p.suffix)},
      {"prompt.query_begin", optional_index(p.query_begin)},
      {"prompt.query_end", optional_index(p.query_end)},
      {"prompt.max_new_tokens", scalar(p.max_new_tokens)},
      {"prompt.dataset", scalar(p.dataset)},
      {"prompt.record", scalar(p.record)},
  };
}

}  // namespace

engine::GenerationConfig OprmOptions::generation(const Vocab& vocab, std::uint64_t seed, int workers) const {
  engine::GenerationConfig g;
  g.chunk_len = chunk_size;
  g.criterion = criterion;
  g.fixed_index = fixed_index;
  g.selection_seed = seed;
  g.decoding = {decoding, temperature, seed};
  g.pad_token = vocab.pad_token;
  g.idk_filter = idk_filter;
  g.error_tokens = {vocab.error_token};
  g.idk_instruction = {vocab.idk_instruction};
  g.workers = workers;
  return g;
}

ExperimentConfig bind_config(const RawConfig& raw, const std::vector<std::string>& required) {
  ExperimentConfig c;
  c.run.workers = default_workers();
  auto table = fields(c);
  for (const auto& [key, values] : raw) {
    auto it = table.find(key);
    if (it == table.end()) throw UsageError("config: unknown key '" + key + "'");
    it->second.set(key, values);
  }
  for (const auto& key : required)
    if (!raw.contains(key)) throw UsageError("config: missing required field '" + key + "'");
  if (c.run.workers < 1) throw UsageError("config: 'run.workers' must be >= 1");
  return c;
}

std::map<std::string, std::string> config_snapshot(const ExperimentConfig& config) {
  ExperimentConfig copy = config;
  std::map<std::string, std::string> out;
  for (const auto& [key, f] : fields(copy)) out[key] = f.get();
  return out;
}

}  // namespace oprm::io
