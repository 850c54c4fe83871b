#include <filesystem>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include "doctest.h"
#include "oprm/io/commands.hpp"
#include "oprm/io/manifest.hpp"

namespace fs = std::filesystem;
using namespace oprm::io;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("oprm_test_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

struct Run {
  int code;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

const char* const kSmokeTrain =
    "[model]\nd = 8\nd_state = 2\nn_keys = 8\nn_values = 8\n"
    "[train]\ncontext_len = 24\nm_blend = 1 2 4\nsteps = 30\nlr = 0.01\ncheckpoint_every = 10\n";

fs::path write_config(const fs::path& dir, const std::string& text, const std::string& name = "exp.ini") {
  const auto p = dir / name;
  std::ofstream(p) << text;
  return p;
}

std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    std::vector<std::string> cells;
    std::istringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

}  // namespace

TEST_CASE("train is deterministic and writes a verifiable manifest") {
  const auto dir = scratch("train");
  const auto cfg = write_config(dir, kSmokeTrain);
  const auto start = std::chrono::steady_clock::now();
  REQUIRE(cli({"train", "--config", cfg.string(), "--out", (dir / "a").string(), "--seed", "4"}).code == 0);
  CHECK(std::chrono::steady_clock::now() - start < std::chrono::seconds(60));
  REQUIRE(cli({"train", "--config", cfg.string(), "--out", (dir / "b").string(), "--seed", "4"}).code == 0);
  for (const char* f : {"model.ckpt", "checkpoints/step_000010.ckpt", "checkpoints/step_000020.ckpt", "loss.csv", "loss.svg"}) {
    REQUIRE(fs::exists(dir / "a" / f));
    CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
  }
  CHECK(verify_manifest(dir / "a" / "manifest.json").empty());
  CHECK_FALSE(fs::exists(dir / "a" / ".oprm.lock"));
  const auto text = slurp(dir / "a" / "loss.csv");
  CHECK(text.find('\r') == std::string::npos);
  CHECK(text.rfind("step,loss,grad_norm,lr\n", 0) == 0);
}

TEST_CASE("exit codes") {
  const auto dir = scratch("codes");
  SUBCASE("missing required field names it") {
    const auto r = cli({"train", "--out", (dir / "x").string(), "--set", "model.d=8"});
    CHECK(r.code == kExitUsage);
    CHECK(r.err.find("train.steps") != std::string::npos);
  }
  SUBCASE("unknown config key") {
    const auto cfg = write_config(dir, "[train]\nsteps = 1\nbogus = 2\n");
    CHECK(cli({"train", "--config", cfg.string(), "--out", (dir / "x").string()}).code == kExitUsage);
  }
  SUBCASE("bad flag values") {
    CHECK(cli({"eval", "--criterion", "best"}).code == kExitUsage);
    CHECK(cli({"eval", "--idk-filter", "maybe"}).code == kExitUsage);
    CHECK(cli({"nonsense"}).code == kExitUsage);
    CHECK(cli({}).code == kExitUsage);
  }
  SUBCASE("missing checkpoint") {
    const auto r = cli({"eval", "--out", (dir / "x").string(), "--set", "eval.checkpoints=" + (dir / "none.ckpt").string()});
    CHECK(r.code == kExitUsage);
    CHECK(r.err.find("none.ckpt") != std::string::npos);
  }
  SUBCASE("divergence") {
    const auto cfg = write_config(dir, std::string(kSmokeTrain) + "lr = 1e308\nweight_decay = 0\n", "dup.ini");
    // Later duplicate keys are rejected, so override through --set instead.
    const auto base = write_config(dir, kSmokeTrain);
    const auto r = cli({"train", "--config", base.string(), "--out", (dir / "div").string(), "--set", "train.lr=1e308",
                        "--set", "train.weight_decay=0"});
    CHECK(r.code == kExitNumeric);
    CHECK(r.err.find("step") != std::string::npos);
    CHECK(cli({"train", "--config", cfg.string(), "--out", (dir / "dup").string()}).code == kExitUsage);
  }
  SUBCASE("locked output directory") {
    fs::create_directories(dir / "locked");
    std::ofstream(dir / "locked" / ".oprm.lock") << "1\n";
    const auto base = write_config(dir, kSmokeTrain);
    const auto r = cli({"train", "--config", base.string(), "--out", (dir / "locked").string()});
    CHECK(r.code == kExitUsage);
    CHECK(r.err.find("locked") != std::string::npos);
  }
  SUBCASE("help") { CHECK(cli({"--help"}).code == kExitOk); }
}

TEST_CASE("eval emits matching baseline and chunked curves with faithful plots") {
  const auto dir = scratch("eval");
  const auto cfg = write_config(dir, kSmokeTrain);
  REQUIRE(cli({"train", "--config", cfg.string(), "--out", (dir / "m").string()}).code == 0);
  const std::vector<std::string> args{"eval",  "--out", (dir / "e1").string(), "--chunk-size", "6", "--set",
                                      "eval.checkpoints=" + (dir / "m" / "model.ckpt").string(),
                                      "--set", "eval.grid=1 2 4 8",  "--set", "eval.context_len=24",
                                      "--set", "eval.contexts_per_m=4", "--set", "eval.lengths=24 48",
                                      "--set", "eval.m_trained=4"};
  REQUIRE(cli(args).code == 0);
  auto again = args;
  again[2] = (dir / "e2").string();
  REQUIRE(cli(again).code == 0);
  for (const char* f : {"curves.csv", "curves.svg", "capacity.csv", "histogram.csv", "length_sweep.csv"})
    CHECK(slurp(dir / "e1" / f) == slurp(dir / "e2" / f));

  const auto rows = csv_rows(slurp(dir / "e1" / "curves.csv"));
  REQUIRE(rows.size() == 9);
  std::vector<std::string> base_m, oprm_m;
  for (std::size_t i = 1; i < rows.size(); ++i) (rows[i][0] == "baseline" ? base_m : oprm_m).push_back(rows[i][1]);
  CHECK(base_m == oprm_m);

  // Every plotted point is a table row and vice versa.
  const std::string svg = slurp(dir / "e1" / "curves.svg");
  const std::regex point(R"re(data-series="([^"]*)" data-x="([^"]*)" data-y="([^"]*)")re");
  std::multiset<std::string> plotted, tabled;
  for (auto it = std::sregex_iterator(svg.begin(), svg.end(), point); it != std::sregex_iterator(); ++it)
    plotted.insert((*it)[1].str() + "," + (*it)[2].str() + "," + (*it)[3].str());
  for (std::size_t i = 1; i < rows.size(); ++i)
    tabled.insert(rows[i][0] + "," + rows[i][1] + ".000000," + rows[i][2]);
  CHECK(plotted == tabled);

  CHECK(csv_rows(slurp(dir / "e1" / "capacity.csv")).size() == 2);
  CHECK(csv_rows(slurp(dir / "e1" / "length_sweep.csv")).size() == 9);
  CHECK(verify_manifest(dir / "e1" / "manifest.json").empty());
}

TEST_CASE("capacity sweep emits one row per grid cell") {
  const auto dir = scratch("grid");
  const auto cfg = write_config(dir, std::string(kSmokeTrain) + "grid_d = 4 8\ngrid_d_state = 1 2\nseeds = 0 1\n");
  REQUIRE(cli({"train", "--config", cfg.string(), "--out", (dir / "g").string(), "--set", "train.steps=2",
               "--set", "train.checkpoint_every=0"}).code == 0);
  std::string ckpts;
  for (int d : {4, 8})
    for (int s : {1, 2})
      for (int seed : {0, 1})
        ckpts += (ckpts.empty() ? "" : " ") + (dir / "g" / ("d" + std::to_string(d) + "_s" + std::to_string(s) + "_seed" +
                                                            std::to_string(seed)) / "model.ckpt").string();
  REQUIRE(cli({"eval", "--out", (dir / "e").string(), "--set", "eval.checkpoints=" + ckpts, "--set", "eval.modes=baseline",
               "--set", "eval.grid=1 2", "--set", "eval.context_len=24", "--set", "eval.contexts_per_m=2"}).code == 0);
  const auto rows = csv_rows(slurp(dir / "e" / "capacity.csv"));
  REQUIRE(rows.size() == 5);
  CHECK(rows[1][0] == "4");
  CHECK(rows[1][1] == "1");
  CHECK(rows[4][0] == "8");
  CHECK(rows[4][1] == "2");
}

TEST_CASE("oprm-run dumps the trace and gen-data is deterministic") {
  const auto dir = scratch("run");
  const auto cfg = write_config(dir, kSmokeTrain);
  REQUIRE(cli({"train", "--config", cfg.string(), "--out", (dir / "m").string()}).code == 0);
  REQUIRE(cli({"gen-data", "--out", (dir / "d1").string(), "--set", "data.n_keys=8", "data.n_values=8",
               "data.context_len=24", "data.grid=1 4"}).code == 0);
  REQUIRE(cli({"gen-data", "--out", (dir / "d2").string(), "--set", "data.n_keys=8", "data.n_values=8",
               "data.context_len=24", "data.grid=1 4"}).code == 0);
  CHECK(slurp(dir / "d1" / "dataset.jsonl") == slurp(dir / "d2" / "dataset.jsonl"));

  const auto r = cli({"oprm-run", "--out", (dir / "r").string(), "--chunk-size", "6", "--criterion", "likelihood",
                      "--set", "prompt.checkpoint=" + (dir / "m" / "model.ckpt").string(), "--set",
                      "prompt.dataset=" + (dir / "d1" / "dataset.jsonl").string(), "--set", "prompt.record=12"});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("answer:") != std::string::npos);
  const auto trace = csv_rows(slurp(dir / "r" / "trace.csv"));
  REQUIRE(trace.size() == 5);  // header + 24/6 chunks
  int selected = 0;
  for (std::size_t i = 1; i < trace.size(); ++i) {
    CHECK(trace[i][2] != "NA");
    selected += trace[i][4] == "1";
  }
  CHECK(selected == 1);

  const auto bad = cli({"oprm-run", "--out", (dir / "r2").string(), "--set",
                        "prompt.checkpoint=" + (dir / "m" / "model.ckpt").string(), "--set", "prompt.context=5 999",
                        "--set", "prompt.suffix=2 5"});
  CHECK(bad.code == kExitUsage);
}

TEST_CASE("bench reports fits over the chunk sweep") {
  const auto dir = scratch("bench");
  REQUIRE(cli({"bench", "--out", dir.string(), "--set", "bench.d=8", "--set", "bench.d_state=2", "--set",
               "bench.chunk_len=8", "--set", "bench.chunks=1 2 4", "--set", "bench.repeats=1"}).code == 0);
  const auto rows = csv_rows(slurp(dir / "bench.csv"));
  REQUIRE(rows.size() == 4);
  CHECK(rows[3][1] == "32");
  CHECK(rows[3][7] == std::to_string(4 * std::stoul(rows[3][6])));
  const auto fit = csv_rows(slurp(dir / "bench_fit.csv"));
  CHECK(fit[0] == std::vector<std::string>{"series", "slope", "intercept", "r2"});
  CHECK(fit.size() == 5);
}
