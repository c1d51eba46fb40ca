// Copyright 2026 The Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "cd/matrix.hpp"
#include "cd/rng.hpp"
#include "cd/tensor_io.hpp"
#include "doctest.h"
#include "test_util.hpp"

namespace {

namespace fs = std::filesystem;
using cd_test::TempDir;
using cd_test::read_file;
using cd_test::write_file;
using nlohmann::json;

// Runs the installed driver; stdout and stderr land in `log`.
int run_tool(const std::string& args, const fs::path& log) {
  const std::string cmd =
      std::string(CDTOOL_PATH) + " " + args + " >" + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  REQUIRE(static_cast<bool>(in));
  return json::parse(in);
}

std::vector<std::string> csv_lines(const fs::path& path) {
  std::ifstream in(path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

// Relative path -> file content, skipping the manifests directory.
std::map<std::string, std::string> artifact_bytes(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    const std::string rel = fs::relative(entry.path(), root).generic_string();
    if (rel.rfind("manifests/", 0) == 0) continue;
    out[rel] = read_file(entry.path());
  }
  return out;
}

struct CliSandbox {
  TempDir dir;
  fs::path config;
  fs::path log;

  CliSandbox() {
    log = dir.file("log.txt");
    const int rc = run_tool("fixture --out " + (dir.path() / "fix").string() +
                                " --dim 16 --train-per-class 16 --test-per-class 8 "
                                "--concepts-per-class 6 --seed 7 --labels circle square",
                            log);
    REQUIRE(rc == 0);
    config = dir.file("config.json");
    write_config(dir.path() / "out");
  }

  void write_config(const fs::path& out_dir, int n_prompt = 2) {
    json j;
    j["paths"]["train"] = (dir.path() / "fix" / "train.jsonl").generic_string();
    j["paths"]["test"] = (dir.path() / "fix" / "test.jsonl").generic_string();
    j["paths"]["stub"] = (dir.path() / "fix" / "stub.jsonl").generic_string();
    j["paths"]["embeddings"] = (dir.path() / "fix" / "embeddings.jsonl").generic_string();
    j["paths"]["out"] = out_dir.generic_string();
    j["classes"] = {"circle", "square"};
    j["seeds"] = {1};
    j["n_prompt"] = n_prompt;
    j["model"] = {{"dim", 16}, {"heads", 2}, {"ffn_dim", 16},
                  {"readout", "last_token"}, {"seed", 5}};
    j["selection"] = {{"k", 4}};
    j["train"] = {{"lr", 0.05}, {"batch_size", 8}, {"max_steps", 150}, {"patience", 40}};
    j["tune"] = {{"lr", 0.02}, {"batch_size", 8}, {"max_steps", 150}, {"patience", 40}};
    j["generator"] = {{"samples_per_prompt", 6}};
    j["attribution_examples"] = 2;
    write_file(config, j.dump(2));
  }

  int stage(const std::string& name, const std::string& extra = "") {
    return run_tool(name + " --config " + config.string() + extra, log);
  }

  fs::path out() const { return dir.path() / "out"; }
};

TEST_SUITE("cli") {

TEST_CASE("full pipeline, byte-identical rerun, sweep and eval shapes") {
  CliSandbox box;

  for (const std::string name : {"gen", "select", "tune", "explain", "attack", "eval"})
    REQUIRE_MESSAGE(box.stage(name) == 0, name << ": " << read_file(box.log));
  REQUIRE(box.stage("factor") == 0);
  REQUIRE(box.stage("sweep-k") == 0);

  const std::vector<std::string> eval_rows = csv_lines(box.out() / "eval.csv");
  REQUIRE(eval_rows.size() == 5);
  CHECK(eval_rows[0] == "metric,seed-1,avg,variance");
  CHECK(eval_rows[1].rfind("acc_ptune,", 0) == 0);
  CHECK(eval_rows[2].rfind("acc_cd,", 0) == 0);
  CHECK(eval_rows[3].rfind("fidelity_kl,", 0) == 0);
  CHECK(eval_rows[4].rfind("rho_grad,", 0) == 0);

  const std::vector<std::string> sweep_rows = csv_lines(box.out() / "sweep_k.csv");
  REQUIRE(sweep_rows.size() == 6);
  CHECK(sweep_rows[0] == "k,n_concepts,acc_cd,fidelity_kl");
  const std::vector<std::string> expected_k = {"1,", "5,", "10,", "15,", "20,"};
  for (std::size_t i = 0; i < expected_k.size(); ++i)
    CHECK(sweep_rows[i + 1].rfind(expected_k[i], 0) == 0);

  const auto first = artifact_bytes(box.out());
  REQUIRE(first.size() > 5);
  for (const std::string name :
       {"gen", "select", "tune", "explain", "attack", "eval", "factor", "sweep-k"})
    REQUIRE(box.stage(name) == 0);
  const auto second = artifact_bytes(box.out());
  REQUIRE(second.size() == first.size());
  for (const auto& [rel, bytes] : first) {
    REQUIRE(second.count(rel) == 1);
    CHECK_MESSAGE(second.at(rel) == bytes, rel << " changed between identical runs");
  }
}

TEST_CASE("stage ordering and missing inputs map to exit 2 and 3") {
  CliSandbox box;

  CHECK(box.stage("select") == 2);
  CHECK(read_file(box.log).find("gen") != std::string::npos);

  CHECK(box.stage("explain") == 2);
  CHECK(box.stage("eval") == 2);

  REQUIRE(box.stage("gen") == 0);
  CHECK(box.stage("tune") == 2);
  CHECK(read_file(box.log).find("select") != std::string::npos);

  const int missing_config =
      run_tool("tune --config " + box.dir.file("absent.json").string(), box.log);
  CHECK(missing_config == 2);

  write_file(box.dir.file("broken.json"), "{malformed");
  CHECK(run_tool("gen --config " + box.dir.file("broken.json").string(), box.log) == 2);

  write_file(box.dir.file("unknown.json"),
             R"({"paths":{"train":"a","test":"b","stub":"c","embeddings":"d","out":"e"},)"
             R"("classes":["x","y"],"mystery":1})");
  CHECK(run_tool("gen --config " + box.dir.file("unknown.json").string(), box.log) == 2);

  CHECK(run_tool("nonsense --config " + box.config.string(), box.log) == 2);
  CHECK(run_tool("--help", box.log) == 0);
}

TEST_CASE("gen without the stub recording exits 3") {
  CliSandbox box;
  fs::remove(box.dir.path() / "fix" / "stub.jsonl");
  CHECK(box.stage("gen") == 3);
  CHECK(read_file(box.log).find("stub") != std::string::npos);
}

TEST_CASE("seed and out overrides win over the config") {
  CliSandbox box;
  REQUIRE(box.stage("gen") == 0);

  const fs::path alt_out = box.dir.path() / "alt";
  REQUIRE(box.stage("gen", " --out " + alt_out.string()) == 0);
  CHECK(fs::exists(alt_out / "pool.jsonl"));

  REQUIRE(box.stage("select", " --seed 42") == 0);
  CHECK(fs::exists(box.out() / "seed-42" / "selected.json"));
  CHECK(!fs::exists(box.out() / "seed-1" / "selected.json"));
}

TEST_CASE("factor reports the residual table for an explicit tensor") {
  CliSandbox box;
  cd::Rng rng(13);
  cd::Matrix p(16, 4);
  for (std::size_t i = 0; i < p.rows(); ++i)
    for (std::size_t j = 0; j < p.cols(); ++j) p(i, j) = rng.gaussian();
  const fs::path p_path = box.dir.file("prompt.cdem");
  cd::save_matrix(p_path, p);

  REQUIRE(box.stage("factor", " --p-file " + p_path.string()) == 0);
  const json report = read_json(box.out() / "factor_report.json");
  REQUIRE(report.at("report").size() == 4);
  double prev = 1e300;
  for (const json& row : report.at("report")) {
    const double residual = row.at("residual").get<double>();
    CHECK(residual <= prev + 1e-12);
    CHECK(std::fabs(row.at("gap").get<double>()) < 1e-6);
    prev = residual;
  }
  CHECK(report.at("report")[3].at("residual").get<double>() <= 1e-10);
  const std::string shown = read_file(box.log);
  CHECK(shown.find("n_concepts") != std::string::npos);
  CHECK(shown.find("svd_optimum") != std::string::npos);

  CHECK(box.stage("factor", " --p-file " + box.dir.file("absent.cdem").string()) == 2);
}

}  // TEST_SUITE

}  // namespace
