#include "oprm/io/manifest.hpp"

#include <fcntl.h>
#include <openssl/evp.h>
#include <unistd.h>

#include <array>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <memory>

#include "oprm/errors.hpp"

namespace oprm::io {

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot hash missing file " + path.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw std::runtime_error("sha256 init failed");
  std::array<char, 1 << 16> buf;
  while (in) {
    in.read(buf.data(), buf.size());
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), digest, &len);
  std::string hex;
  char byte[3];
  for (unsigned i = 0; i < len; ++i) {
    std::snprintf(byte, sizeof byte, "%02x", digest[i]);
    hex += byte;
  }
  return hex;
}

void RunManifest::add_artifact(const std::filesystem::path& root, const std::filesystem::path& relative) {
  artifacts.emplace_back(relative.generic_string(), sha256_file(root / relative));
}

void write_manifest(const std::filesystem::path& path, const RunManifest& m) {
  nlohmann::ordered_json j;
  j["tool_version"] = m.tool_version;
  j["command"] = m.command;
  j["config"] = m.config;
  auto& arts = j["artifacts"] = nlohmann::ordered_json::array();
  for (const auto& [p, h] : m.artifacts) arts.push_back({{"path", p}, {"sha256", h}});
  auto& times = j["timings_s"] = nlohmann::ordered_json::object();
  for (const auto& [stage, s] : m.timings) times[stage] = s;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw UsageError("cannot write manifest " + path.string());
  out << j.dump(2) << '\n';
}

RunManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read manifest " + path.string());
  try {
    const auto j = nlohmann::ordered_json::parse(in);
    RunManifest m;
    m.tool_version = j.at("tool_version").get<std::string>();
    m.command = j.at("command").get<std::string>();
    m.config = j.at("config").get<std::map<std::string, std::string>>();
    for (const auto& a : j.at("artifacts"))
      m.artifacts.emplace_back(a.at("path").get<std::string>(), a.at("sha256").get<std::string>());
    for (const auto& [stage, s] : j.at("timings_s").items()) m.timings.emplace_back(stage, s.get<double>());
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw UsageError("malformed manifest " + path.string() + ": " + e.what());
  }
}

std::vector<std::string> verify_manifest(const std::filesystem::path& manifest_path) {
  const RunManifest m = read_manifest(manifest_path);
  const auto root = manifest_path.parent_path();
  std::vector<std::string> bad;
  for (const auto& [p, h] : m.artifacts) {
    const auto full = root / p;
    if (!std::filesystem::exists(full) || sha256_file(full) != h) bad.push_back(p);
  }
  return bad;
}

void StageTimer::lap(const std::string& stage) {
  const auto now = std::chrono::steady_clock::now();
  manifest_.timings.emplace_back(stage, std::chrono::duration<double>(now - start_).count());
  start_ = now;
}

DirectoryLock::DirectoryLock(const std::filesystem::path& dir) : path_(dir / ".oprm.lock") {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw UsageError("cannot create output directory " + dir.string() + ": " + ec.message());
  const int fd = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_EXCL, 0644);
  if (fd < 0)
    throw UsageError("output directory " + dir.string() + " is locked by another run (remove " + path_.string() +
                     " if stale)");
  const std::string pid = std::to_string(::getpid()) + "\n";
  [[maybe_unused]] auto n = ::write(fd, pid.data(), pid.size());
  ::close(fd);
}

DirectoryLock::~DirectoryLock() {
  std::error_code ec;
  std::filesystem::remove(path_, ec);
}

}  // namespace oprm::io
