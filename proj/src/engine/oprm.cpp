#include "oprm/engine/oprm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "oprm/engine/parallel.hpp"
#include "oprm/errors.hpp"
#include "oprm/io/table.hpp"

namespace oprm::engine {

void GenerationConfig::validate() const {
  if (chunk_len < 1) throw UsageError("chunk length must be at least 1");
  if (max_new_tokens < 0) throw UsageError("max_new_tokens must be nonnegative");
  if (workers < 1) throw UsageError("worker budget must be at least 1");
  if (idk_filter && error_tokens.empty()) throw UsageError("idk filter needs at least one error token");
  decoding.validate();
}

void SelectionTrace::write_csv(std::ostream& out) const {
  io::CsvWriter csv(out, {"index", "entropy_bits", "query_loglik", "is_idk", "selected"});
  for (const auto& c : chunks)
    csv.row(c.index, c.entropy_bits, c.query_loglik ? io::format_real(*c.query_loglik) : std::string("NA"), c.is_idk,
            c.selected);
}

namespace {

template <typename F>
auto staged(const char* stage, F&& f) {
  try {
    return f();
  } catch (...) {
    rethrow_with_context(std::current_exception(), std::string("stage: ") + stage);
  }
}

struct Prepared {
  ChunkSet chunks;
  std::vector<TokenId> suffix;  // possibly IDK-augmented
  std::vector<ChunkScore> scores;
  std::vector<std::size_t> kept;
};

Prepared prepare(const Backend& backend, const PromptParts& parts, const GenerationConfig& config) {
  config.validate();
  parts.validate();
  Prepared p;
  p.chunks = staged("chunking", [&] { return make_chunks(parts.context, config.chunk_len, config.pad_token); });
  p.suffix = parts.suffix;
  if (config.idk_filter) p.suffix.insert(p.suffix.begin(), config.idk_instruction.begin(), config.idk_instruction.end());
  const auto prompts = build_prompts(parts.prefix, p.chunks, p.suffix);

  PrefillOptions options{config.decoding, config.error_tokens, config.workers, {}};
  p.scores = staged("speculative prefill", [&] { return speculative_prefill(backend, prompts, options); });

  if (config.criterion == Criterion::max_query_likelihood) {
    const bool augmented = config.idk_filter && config.idk_suffix_in_likelihood;
    const std::size_t shift = augmented ? config.idk_instruction.size() : 0;
    const std::vector<TokenId>& suffix = augmented ? p.suffix : parts.suffix;
    staged("query likelihood", [&] {
      parallel_for(
          p.chunks.count(), config.workers, {},
          [&](std::size_t i) {
            p.scores[i].query_loglik = query_log_likelihood(backend, parts.prefix, p.chunks.chunks[i], suffix,
                                                            parts.query_begin + shift, parts.query_end + shift);
          },
          "chunk");
      return 0;
    });
  }

  if (config.idk_filter) {
    p.kept = idk_filter(p.scores);
  } else {
    p.kept.resize(p.scores.size());
    std::iota(p.kept.begin(), p.kept.end(), 0);
  }
  return p;
}

SelectionTrace make_trace(const Prepared& p, std::vector<std::size_t> selected) {
  SelectionTrace t;
  t.pad_count = p.chunks.pad_count;
  for (std::size_t i = 0; i < p.scores.size(); ++i) {
    const auto& s = p.scores[i];
    const bool sel = std::find(selected.begin(), selected.end(), i) != selected.end();
    t.chunks.push_back({i, s.entropy_bits, s.query_loglik, s.is_idk, s.first_token, sel});
  }
  t.kept = p.kept;
  t.selected = std::move(selected);
  return t;
}

/// The sampler stream of chunk `i`, advanced past its first token.
Sampler resume_sampler(const GenerationConfig& config, const ChunkScore& score, std::size_t i) {
  Sampler s(config.decoding, i);
  s(score.first_dist);
  return s;
}

}  // namespace

std::vector<TokenId> vanilla_generate(const Backend& backend, const PromptParts& parts, const GenerationConfig& config) {
  config.validate();
  parts.validate();
  const auto prompt = parts.joined();
  auto [state, dist] = staged("prefill", [&] { return backend.prefill(prompt); });
  Sampler sampler(config.decoding, 0);
  const TokenId first = sampler(dist);
  return staged("decode", [&] {
    return decode_autoregressive(backend, *state, first, sampler, config.max_new_tokens, config.stop_tokens);
  });
}

GenerationResult oprm_generate(const Backend& backend, const PromptParts& parts, const GenerationConfig& config) {
  Prepared p = prepare(backend, parts, config);
  std::mt19937_64 rng(config.selection_seed);
  const std::size_t j = staged("selection", [&] {
    return select_chunk(p.scores, p.kept, config.criterion, rng, config.fixed_index);
  });
  // Only the selected state survives into decoding.
  std::unique_ptr<SessionState> state = std::move(p.scores[j].state);
  for (auto& s : p.scores) s.state.reset();

  Sampler sampler = resume_sampler(config, p.scores[j], j);
  GenerationResult out;
  out.tokens = staged("decode", [&] {
    return decode_autoregressive(backend, *state, p.scores[j].first_token, sampler, config.max_new_tokens,
                                 config.stop_tokens);
  });
  out.trace = make_trace(p, {j});
  return out;
}

GenerationResult summ_generate(const Backend& backend, const PromptParts& parts, const GenerationConfig& config) {
  Prepared p = prepare(backend, parts, config);
  GenerationResult out;
  for (std::size_t n = 0; n < p.kept.size(); ++n) {
    const std::size_t i = p.kept[n];
    if (n > 0) out.tokens.insert(out.tokens.end(), config.answer_separator.begin(), config.answer_separator.end());
    Sampler sampler = resume_sampler(config, p.scores[i], i);
    const auto answer = staged("decode", [&] {
      return decode_autoregressive(backend, *p.scores[i].state, p.scores[i].first_token, sampler,
                                   config.max_new_tokens, config.stop_tokens);
    });
    p.scores[i].state.reset();
    out.tokens.insert(out.tokens.end(), answer.begin(), answer.end());
  }
  out.trace = make_trace(p, p.kept);
  return out;
}

GenerationResult cc_generate(const Backend& backend, const PromptParts& parts, std::size_t top_k,
                             const GenerationConfig& config) {
  if (top_k < 1) throw UsageError("top-k must be at least 1");
  Prepared p = prepare(backend, parts, config);
  for (auto& s : p.scores) s.state.reset();
  std::mt19937_64 rng(config.selection_seed);
  auto ranked = staged("selection", [&] {
    return rank_chunks(p.scores, p.kept, config.criterion, rng, config.fixed_index);
  });
  ranked.resize(std::min(top_k, ranked.size()));
  std::sort(ranked.begin(), ranked.end());

  std::vector<TokenId> prompt(parts.prefix);
  for (std::size_t i : ranked)
    prompt.insert(prompt.end(), p.chunks.chunks[i].begin(), p.chunks.chunks[i].end());
  prompt.insert(prompt.end(), p.suffix.begin(), p.suffix.end());

  auto [state, dist] = staged("combined prefill", [&] { return backend.prefill(prompt); });
  Sampler sampler(config.decoding, ranked.front());
  const TokenId first = sampler(dist);
  GenerationResult out;
  out.tokens = staged("decode", [&] {
    return decode_autoregressive(backend, *state, first, sampler, config.max_new_tokens, config.stop_tokens);
  });
  out.trace = make_trace(p, ranked);
  return out;
}

}  // namespace oprm::engine
