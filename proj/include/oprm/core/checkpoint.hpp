#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>

#include "oprm/core/model.hpp"

namespace oprm {

inline constexpr char kCheckpointMagic[8] = {'O', 'P', 'R', 'M', 'C', 'K', 'P', '1'};
inline constexpr int kCheckpointVersion = 1;

/// Parameters plus the metadata stored alongside them. `extra` carries
/// free-form key=value pairs (e.g. the vocabulary layout).
struct Checkpoint {
  ModelParams params;
  std::uint64_t seed = 0;
  std::int64_t step = 0;
  std::map<std::string, std::string> extra;
};

/// Layout: 8-byte magic, u32 little-endian header length, UTF-8 header of
/// `key=value` lines, then every tensor as little-endian float32 in
/// ModelParams::tensors() order.
void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
/// Throws UsageError if the file is missing, truncated, or has a foreign
/// magic or version.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Rounds every parameter through float32, matching a save/load round trip.
void round_to_float(ModelParams& params);

}  // namespace oprm
