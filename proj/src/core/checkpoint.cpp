#include "oprm/core/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "oprm/errors.hpp"

namespace oprm {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

void put_u32(std::ostream& out, std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); }

std::uint32_t get_u32(std::istream& in) {
  std::uint32_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw UsageError("checkpoint: truncated header");
  return v;
}

const char* const kCoreKeys[] = {"format-version", "vocab_size", "d", "d_state", "conv_width", "n_layers", "seed", "step"};

bool is_core_key(const std::string& k) {
  for (const char* c : kCoreKeys)
    if (k == c) return true;
  return false;
}

std::int64_t parse_int(const std::map<std::string, std::string>& kv, const std::string& key) {
  auto it = kv.find(key);
  if (it == kv.end()) throw UsageError("checkpoint: header lacks '" + key + "'");
  try {
    std::size_t used = 0;
    const long long v = std::stoll(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument(key);
    return v;
  } catch (const std::logic_error&) {
    throw UsageError("checkpoint: bad value for '" + key + "': " + it->second);
  }
}

}  // namespace

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  const ModelConfig& cfg = ckpt.params.config();
  std::ostringstream header;
  header << "format-version=" << kCheckpointVersion << '\n'
         << "vocab_size=" << cfg.vocab_size << '\n'
         << "d=" << cfg.d << '\n'
         << "d_state=" << cfg.d_state << '\n'
         << "conv_width=" << cfg.conv_width << '\n'
         << "n_layers=" << cfg.n_layers << '\n'
         << "seed=" << ckpt.seed << '\n'
         << "step=" << ckpt.step << '\n';
  for (const auto& [k, v] : ckpt.extra) {
    if (is_core_key(k) || k.find_first_of("=\n") != std::string::npos || v.find('\n') != std::string::npos)
      throw UsageError("checkpoint: invalid metadata key '" + k + "'");
    header << k << '=' << v << '\n';
  }
  const std::string h = header.str();
  out.write(kCheckpointMagic, sizeof kCheckpointMagic);
  put_u32(out, static_cast<std::uint32_t>(h.size()));
  out.write(h.data(), static_cast<std::streamsize>(h.size()));
  std::vector<float> buf;
  for (const auto& t : ckpt.params.tensors()) {
    buf.assign(t.data.begin(), t.data.end());
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
  }
  if (!out) throw UsageError("checkpoint: write failed");
}

Checkpoint read_checkpoint(std::istream& in) {
  char magic[sizeof kCheckpointMagic];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0)
    throw UsageError("checkpoint: bad magic");
  const std::uint32_t len = get_u32(in);
  if (len > (1u << 20)) throw UsageError("checkpoint: header too large");
  std::string h(len, '\0');
  if (!in.read(h.data(), len)) throw UsageError("checkpoint: truncated header");

  std::map<std::string, std::string> kv;
  std::istringstream lines(h);
  for (std::string line; std::getline(lines, line);) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw UsageError("checkpoint: malformed header line '" + line + "'");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  const auto version = parse_int(kv, "format-version");
  if (version != kCheckpointVersion)
    throw UsageError("checkpoint: unsupported format-version " + std::to_string(version));

  ModelConfig cfg;
  cfg.vocab_size = static_cast<int>(parse_int(kv, "vocab_size"));
  cfg.d = static_cast<int>(parse_int(kv, "d"));
  cfg.d_state = static_cast<int>(parse_int(kv, "d_state"));
  cfg.conv_width = static_cast<int>(parse_int(kv, "conv_width"));
  cfg.n_layers = static_cast<int>(parse_int(kv, "n_layers"));
  cfg.validate();

  Checkpoint ckpt;
  ckpt.seed = static_cast<std::uint64_t>(parse_int(kv, "seed"));
  ckpt.step = parse_int(kv, "step");
  for (auto& [k, v] : kv)
    if (!is_core_key(k)) ckpt.extra.emplace(k, v);

  ckpt.params = ModelParams::zeros(cfg);
  std::vector<float> buf;
  for (auto& t : ckpt.params.tensors()) {
    buf.resize(t.data.size());
    if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float))))
      throw UsageError("checkpoint: truncated tensor '" + t.name + "'");
    std::copy(buf.begin(), buf.end(), t.data.begin());
  }
  if (in.peek() != std::char_traits<char>::eof()) throw UsageError("checkpoint: trailing bytes");
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw UsageError("cannot write checkpoint " + path.string());
  write_checkpoint(out, ckpt);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open checkpoint " + path.string());
  try {
    return read_checkpoint(in);
  } catch (const UsageError& e) {
    throw UsageError(path.string() + ": " + e.what());
  }
}

void round_to_float(ModelParams& params) {
  for (auto& t : params.tensors())
    for (double& v : t.data) v = static_cast<double>(static_cast<float>(v));
}

}  // namespace oprm
