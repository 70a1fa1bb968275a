// Drives the installed binary end to end through a shell. The binary path
// comes from CMake via HAR_CLI_PATH.

#include <array>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "har/rng.hpp"
#include "json.hpp"

namespace fs = std::filesystem;

namespace {

struct RunResult {
  int exit_code = -1;
  std::string output;
};

RunResult run(const std::string& args) {
  const std::string cmd = std::string(HAR_CLI_PATH) + " " + args + " 2>&1";
  std::array<char, 256> buf{};
  RunResult result;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  while (fgets(buf.data(), buf.size(), pipe)) result.output += buf.data();
  const int status = pclose(pipe);
  result.exit_code = WEXITSTATUS(status);
  return result;
}

std::uint64_t file_hash(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  return har::fnv1a(text.data(), text.size());
}

fs::path workdir() {
  const fs::path dir = fs::temp_directory_path() / "har_cli_tests";
  fs::create_directories(dir);
  return dir;
}

void write_config(const fs::path& path, const nlohmann::json& extra) {
  nlohmann::json cfg = {
      {"dataset", {{"path", (workdir() / "home.log").string()}}},
      {"classifier", {{"units", 12}, {"epochs", 10}}},
      {"seed", 11},
      {"output_dir", (workdir() / "out").string()},
  };
  for (auto it = extra.begin(); it != extra.end(); ++it) {
    if (it->is_object() && cfg.contains(it.key()))
      for (auto jt = it->begin(); jt != it->end(); ++jt)
        cfg[it.key()][jt.key()] = *jt;
    else
      cfg[it.key()] = *it;
  }
  std::ofstream out(path);
  out << cfg.dump(2);
}

}  // namespace

TEST_CASE("cli: synth produces a parseable log and deterministic bytes") {
  const fs::path dir = workdir();
  const RunResult first =
      run("synth aruba_like " + (dir / "home.log").string() + " --seed 77");
  CHECK(first.exit_code == 0);
  CHECK(fs::exists(dir / "home.log"));
  CHECK(fs::exists(dir / "home.log.truth.json"));
  const std::uint64_t h1 = file_hash(dir / "home.log");

  const RunResult second =
      run("synth aruba_like " + (dir / "home.log").string() + " --seed 77");
  CHECK(second.exit_code == 0);
  CHECK(file_hash(dir / "home.log") == h1);

  const RunResult other = run("synth nowhere_like " + (dir / "x.log").string());
  CHECK(other.exit_code != 0);
}

TEST_CASE("cli: clean is idempotent and reports duplicates") {
  const fs::path dir = workdir();
  {
    std::ofstream log(dir / "dirty.log");
    log << "2024-01-01 08:00:02.000000 M001 ON\n";
    log << "2024-01-01 08:00:01.000000 M002 OFF\n";
    log << "2024-01-01 08:00:01.000000 M002 OFF\n";
  }
  const RunResult first =
      run("clean " + (dir / "dirty.log").string() + " " +
          (dir / "clean.log").string());
  CHECK(first.exit_code == 0);
  const nlohmann::json report = nlohmann::json::parse(first.output);
  CHECK(report["duplicate_events_removed"] == 1);
  CHECK(report["out_of_order_events"] == 1);

  // Cleaning an already-clean file changes nothing.
  const RunResult second =
      run("clean " + (dir / "clean.log").string() + " " +
          (dir / "clean2.log").string());
  CHECK(second.exit_code == 0);
  CHECK(file_hash(dir / "clean.log") == file_hash(dir / "clean2.log"));
}

TEST_CASE("cli: malformed input fails with the line number") {
  const fs::path dir = workdir();
  {
    std::ofstream log(dir / "bad.log");
    log << "2024-01-01 08:00:02.000000 M001 ON\n";
    log << "garbage\n";
  }
  const RunResult result = run("clean " + (dir / "bad.log").string() + " " +
                               (dir / "ignored.log").string());
  CHECK(result.exit_code != 0);
  CHECK(result.output.find("line 2") != std::string::npos);
}

TEST_CASE("cli: config errors are reported") {
  const fs::path dir = workdir();
  {
    std::ofstream cfg(dir / "no_path.json");
    cfg << R"({"seed": 1})";
  }
  const RunResult no_path = run("experiment " + (dir / "no_path.json").string());
  CHECK(no_path.exit_code != 0);
  CHECK(no_path.output.find("dataset.path") != std::string::npos);

  {
    std::ofstream cfg(dir / "no_seed.json");
    cfg << R"({"dataset": {"path": "/etc/hostname"}})";
  }
  const RunResult no_seed = run("experiment " + (dir / "no_seed.json").string());
  CHECK(no_seed.exit_code != 0);
  CHECK(no_seed.output.find("seed") != std::string::npos);
}

TEST_CASE("cli: experiment artifacts are reproducible byte for byte") {
  const fs::path dir = workdir();
  run("synth aruba_like " + (dir / "home.log").string() + " --seed 77");
  write_config(dir / "exp.json", {});

  REQUIRE(run("experiment " + (dir / "exp.json").string()).exit_code == 0);
  const std::uint64_t report1 = file_hash(dir / "out" / "report.json");
  const std::uint64_t manifest1 = file_hash(dir / "out" / "manifest.json");
  const std::uint64_t metrics1 = file_hash(dir / "out" / "metrics.csv");

  REQUIRE(run("experiment " + (dir / "exp.json").string()).exit_code == 0);
  CHECK(file_hash(dir / "out" / "report.json") == report1);
  CHECK(file_hash(dir / "out" / "manifest.json") == manifest1);
  CHECK(file_hash(dir / "out" / "metrics.csv") == metrics1);

  // The manifest records exactly which fields the user overrode.
  std::ifstream in(dir / "out" / "manifest.json");
  nlohmann::json manifest;
  in >> manifest;
  const auto& overridden = manifest["overridden_fields"];
  CHECK(std::find(overridden.begin(), overridden.end(),
                  "classifier.units") != overridden.end());
  CHECK(std::find(overridden.begin(), overridden.end(),
                  "classifier.directionality") == overridden.end());
  // Untouched fields carry the built-in defaults.
  CHECK(manifest["config"]["dataset"]["max_len"] == 2000);
  CHECK(manifest["config"]["classifier"]["batch"] == 64);
  CHECK(manifest["config"]["classifier"]["patience"] == 20);
  CHECK(manifest["config"]["embedding"]["size"] == 64);
  CHECK(manifest["config"]["embedding"]["w2v_window"] == 20);
  CHECK(manifest["config"]["embedding"]["w2v_epochs"] == 100);
  CHECK(manifest["config"]["embedding"]["bilm_window"] == 60);
  CHECK(manifest["config"]["embedding"]["bilm_epochs"] == 400);
  CHECK(manifest["config"]["embedding"]["bilm_batch"] == 512);
}

TEST_CASE("cli: w2v training, export and checkpoint reuse") {
  const fs::path dir = workdir();
  run("synth aruba_like " + (dir / "home.log").string() + " --seed 77");
  write_config(dir / "w2v.json",
               {{"embedding", {{"type", "word2vec_frozen"}, {"w2v_epochs", 8}}}});

  REQUIRE(run("train-w2v " + (dir / "w2v.json").string()).exit_code == 0);
  CHECK(fs::exists(dir / "out" / "w2v.ckpt"));
  CHECK(fs::exists(dir / "out" / "w2v_loss.csv"));

  const std::uint64_t ckpt1 = file_hash(dir / "out" / "w2v.ckpt");
  REQUIRE(run("train-w2v " + (dir / "w2v.json").string()).exit_code == 0);
  CHECK(file_hash(dir / "out" / "w2v.ckpt") == ckpt1);

  REQUIRE(run("export-emb " + (dir / "out" / "w2v.ckpt").string() + " " +
              (dir / "emb.csv").string())
              .exit_code == 0);
  // One data row per non-PAD vocabulary row.
  std::ifstream vocab_file(dir / "out" / "vocab.json");
  nlohmann::json vocab;
  vocab_file >> vocab;
  const std::size_t expected_rows = vocab["entries"].size() + 1;  // + UNK
  std::ifstream csv(dir / "emb.csv");
  std::string line;
  std::size_t rows = 0;
  std::getline(csv, line);  // header
  while (std::getline(csv, line))
    if (!line.empty()) ++rows;
  CHECK(rows == expected_rows);
}

TEST_CASE("cli: bilm training then transfer onto a renamed home") {
  const fs::path dir = workdir();
  run("synth aruba_like " + (dir / "home.log").string() + " --seed 77");
  const nlohmann::json bilm_emb = {{"type", "elmo_frozen"},
                                   {"size", 12},
                                   {"bilm_epochs", 12},
                                   {"bilm_batch", 32},
                                   {"bilm_learning_rate", 0.003}};
  write_config(dir / "bilm.json", {{"embedding", bilm_emb}});
  REQUIRE(run("train-bilm " + (dir / "bilm.json").string()).exit_code == 0);
  CHECK(fs::exists(dir / "out" / "bilm.ckpt"));
  CHECK(fs::exists(dir / "out" / "bilm.ckpt.meta.json"));
  CHECK(fs::exists(dir / "out" / "bilm.ckpt.curve.csv"));

  // Degenerate transfer: source home = target home.
  write_config(dir / "target.json",
               {{"embedding", bilm_emb},
                {"output_dir", (dir / "out_transfer").string()}});
  const RunResult transfer =
      run("transfer " + (dir / "out" / "bilm.ckpt").string() + " " +
          (dir / "target.json").string());
  CHECK(transfer.exit_code == 0);
  CHECK(fs::exists(dir / "out_transfer" / "report.json"));
  CHECK(transfer.output.find("averaged accuracy") != std::string::npos);
}

TEST_CASE("cli: the four-encoder grid yields four reports with compat views") {
  const fs::path dir = workdir();
  run("synth aruba_like " + (dir / "home.log").string() + " --seed 77");
  const auto begin = std::chrono::steady_clock::now();
  std::size_t reports = 0;
  for (const std::string enc :
       {"none", "trainable_embedding", "word2vec_frozen", "elmo_frozen"}) {
    const fs::path out = dir / ("grid_" + enc);
    write_config(dir / ("grid_" + enc + ".json"),
                 {{"embedding",
                   {{"type", enc},
                    {"size", 12},
                    {"w2v_epochs", 8},
                    {"bilm_epochs", 12},
                    {"bilm_batch", 32},
                    {"bilm_learning_rate", 0.003}}},
                  {"output_dir", out.string()}});
    REQUIRE(run("experiment " + (dir / ("grid_" + enc + ".json")).string())
                .exit_code == 0);
    if (fs::exists(out / "report.json")) ++reports;
    std::ifstream in(out / "report.json");
    nlohmann::json report;
    in >> report;
    CHECK(report["averaged"].contains("compat_view"));
    CHECK(report["per_fold"].size() == 3);
  }
  CHECK(reports == 4);
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - begin)
          .count();
  CHECK(elapsed < 600.0);  // whole generated-scenario grid stays quick
}

TEST_CASE("cli: stats reports the dataset shape") {
  const fs::path dir = workdir();
  run("synth cairo_like " + (dir / "cairo.log").string() + " --seed 3");
  const RunResult result = run("stats " + (dir / "cairo.log").string());
  CHECK(result.exit_code == 0);
  const nlohmann::json j = nlohmann::json::parse(result.output);
  CHECK(j["activity_class_count"].get<int>() == 6);
  CHECK(j["day_count"].get<int>() == 30);
  CHECK(j["sequences_per_class"].contains("Other"));
}
