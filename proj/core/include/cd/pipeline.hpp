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

#ifndef CD_PIPELINE_HPP_
#define CD_PIPELINE_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "cd/dataset.hpp"
#include "cd/decomposer.hpp"
#include "cd/encoder.hpp"
#include "cd/submodular.hpp"
#include "cd/toy_transformer.hpp"

namespace cd {

struct RunPaths {
  std::filesystem::path train;
  std::filesystem::path test;
  std::filesystem::path stub;
  std::filesystem::path embeddings;
  std::filesystem::path out;
};

struct EncoderSpec {
  EncoderMode mode = EncoderMode::kFileBacked;
  int dim = 64;             // hash mode only
  std::uint64_t seed = 0;   // hash mode only
};

// One JSON config drives every stage. Stages read their inputs from the
// config paths plus earlier artifacts in paths.out, and write only under
// paths.out.
struct RunConfig {
  RunPaths paths;
  std::vector<std::string> classes;
  std::vector<std::uint64_t> seeds = {1, 42, 100, 999, 1756};
  int shots = 0;  // training examples kept per class; 0 keeps the full set
  int n_prompt = 1;
  ModelConfig model;
  SelectionConfig selection;
  TrainParams train;
  TuneConfig tune;
  EncoderSpec encoder;
  int samples_per_prompt = 50;
  int explain_top_k = 3;
  int attribution_examples = 5;  // examples that also get IG/Shapley scores
  YPrimeRule attack_rule = YPrimeRule::kRunnerUp;
  int attack_top_k = 3;
  int ig_steps = 64;
  int shapley_samples = 200;
  int correlation_top_k = 3;
  int eval_cap = 0;  // test examples used per stage; 0 keeps all
  double factor_epsilon = 1e-6;
};

// Parses a config file. Unknown keys, malformed values, or missing required
// fields are ConfigError/ParseError. Does not touch the filesystem beyond
// the config file itself.
RunConfig load_run_config(const std::filesystem::path& path);

// Checks invariants that need the filesystem: dataset and embedding paths
// exist, classes and seeds are usable. ConfigError on violation. The stub
// path is deliberately left to the gen stage.
void validate_run_config(const RunConfig& cfg);

// Canonical JSON echo of a config; hashing this yields the manifest's
// config hash.
nlohmann::json to_json(const RunConfig& cfg);

// Embeds each text as a single-column token matrix; labels become indices
// into `classes`.
std::vector<EmbeddedExample> embed_dataset(const Encoder& encoder,
                                           const std::vector<LabeledText>& data,
                                           const std::vector<std::string>& classes);

// Pipeline stages. Each writes its artifacts plus manifests/<stage>.json
// under paths.out and throws cd::Error on failure; a missing upstream
// artifact is a ConfigError naming the stage to rerun.
void run_gen(const RunConfig& cfg);
void run_select(const RunConfig& cfg);
void run_tune(const RunConfig& cfg);
void run_explain(const RunConfig& cfg);
void run_attack(const RunConfig& cfg);
void run_eval(const RunConfig& cfg);

// Re-selects and re-tunes against the first seed's tuned prompt for each k,
// emitting one row per k. Empty ks defaults to {1, 5, 10, 15, 20}.
void run_sweep_k(const RunConfig& cfg, std::vector<int> ks = {});

// Residual-vs-optimum report for the prompt matrix stored at p_file (empty
// path defaults to the first seed's tuned prompt). Empty n_concepts sweeps
// 1..min(rows, cols).
void run_factor(const RunConfig& cfg, const std::filesystem::path& p_file = {},
                std::vector<int> n_concepts = {});

}  // namespace cd

#endif  // CD_PIPELINE_HPP_
