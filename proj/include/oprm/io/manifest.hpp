#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace oprm::io {

inline constexpr const char* kToolVersion = "0.1.0";

/// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

/// What a command did: its config, the files it produced (paths relative to
/// the output directory) with their hashes, and per-stage wall-clock time.
struct RunManifest {
  std::string tool_version = kToolVersion;
  std::string command;
  std::map<std::string, std::string> config;
  std::vector<std::pair<std::string, std::string>> artifacts;  // path, sha256
  std::vector<std::pair<std::string, double>> timings;         // stage, seconds

  /// Records `path` (relative to `root`) with its current hash.
  void add_artifact(const std::filesystem::path& root, const std::filesystem::path& relative);
};

void write_manifest(const std::filesystem::path& path, const RunManifest& manifest);
RunManifest read_manifest(const std::filesystem::path& path);

/// Artifacts whose current hash differs from the manifest (missing files
/// included). Empty means the manifest verifies.
std::vector<std::string> verify_manifest(const std::filesystem::path& manifest_path);

/// Wall-clock stopwatch that appends named stages to a manifest.
class StageTimer {
 public:
  explicit StageTimer(RunManifest& m) : manifest_(m), start_(std::chrono::steady_clock::now()) {}
  void lap(const std::string& stage);

 private:
  RunManifest& manifest_;
  std::chrono::steady_clock::time_point start_;
};

/// Exclusive claim on an output directory through `<dir>/.oprm.lock`.
/// Throws UsageError if another run holds it.
class DirectoryLock {
 public:
  explicit DirectoryLock(const std::filesystem::path& dir);
  ~DirectoryLock();
  DirectoryLock(const DirectoryLock&) = delete;
  DirectoryLock& operator=(const DirectoryLock&) = delete;

 private:
  std::filesystem::path path_;
};

}  // namespace oprm::io
