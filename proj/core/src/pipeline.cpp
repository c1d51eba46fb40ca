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

#include "cd/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>

#include <json.hpp>

#include "cd/attribution.hpp"
#include "cd/candidate_gen.hpp"
#include "cd/candidates.hpp"
#include "cd/error.hpp"
#include "cd/numerics.hpp"
#include "cd/rng.hpp"
#include "cd/tensor_io.hpp"

namespace cd {
namespace {

using nlohmann::json;

constexpr std::uint64_t kShotSalt = 0x73686f74;
constexpr std::uint64_t kTrainSalt = 0x7074756e;
constexpr std::uint64_t kTuneSalt = 0x6364746e;
constexpr std::uint64_t kShapleySalt = 0x73686170;

std::uint64_t sub_seed(std::uint64_t seed, std::uint64_t salt) {
  return splitmix64(seed ^ (salt * 0x9e3779b97f4a7c15ULL));
}

// ---------------------------------------------------------------- config --

void expect_object(const json& j, const std::string& ctx) {
  if (!j.is_object()) fail(ErrorKind::kConfigError, ctx + " must be a JSON object");
}

void expect_keys(const json& j, const std::set<std::string>& allowed, const std::string& ctx) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (allowed.count(it.key()) == 0)
      fail(ErrorKind::kConfigError, "unknown key '" + it.key() + "' in " + ctx);
}

double get_num(const json& j, const char* key, double def, const std::string& ctx) {
  if (!j.contains(key)) return def;
  if (!j.at(key).is_number())
    fail(ErrorKind::kConfigError, ctx + "." + key + " must be a number");
  return j.at(key).get<double>();
}

int get_int(const json& j, const char* key, int def, const std::string& ctx) {
  if (!j.contains(key)) return def;
  if (!j.at(key).is_number_integer())
    fail(ErrorKind::kConfigError, ctx + "." + key + " must be an integer");
  return j.at(key).get<int>();
}

std::uint64_t get_u64(const json& j, const char* key, std::uint64_t def, const std::string& ctx) {
  if (!j.contains(key)) return def;
  if (!j.at(key).is_number_unsigned())
    fail(ErrorKind::kConfigError, ctx + "." + key + " must be a non-negative integer");
  return j.at(key).get<std::uint64_t>();
}

bool get_bool(const json& j, const char* key, bool def, const std::string& ctx) {
  if (!j.contains(key)) return def;
  if (!j.at(key).is_boolean())
    fail(ErrorKind::kConfigError, ctx + "." + key + " must be a boolean");
  return j.at(key).get<bool>();
}

std::string get_str(const json& j, const char* key, const std::string& def,
                    const std::string& ctx) {
  if (!j.contains(key)) return def;
  if (!j.at(key).is_string())
    fail(ErrorKind::kConfigError, ctx + "." + key + " must be a string");
  return j.at(key).get<std::string>();
}

std::string req_str(const json& j, const char* key, const std::string& ctx) {
  if (!j.contains(key) || !j.at(key).is_string())
    fail(ErrorKind::kConfigError, ctx + "." + key + " is required and must be a string");
  return j.at(key).get<std::string>();
}

template <typename Enum>
Enum parse_enum(const std::string& value, const std::vector<std::pair<std::string, Enum>>& table,
                const std::string& ctx) {
  for (const auto& entry : table)
    if (entry.first == value) return entry.second;
  std::string options;
  for (const auto& entry : table) options += (options.empty() ? "" : ", ") + entry.first;
  fail(ErrorKind::kConfigError, ctx + ": '" + value + "' is not one of {" + options + "}");
}

template <typename Enum>
std::string enum_name(Enum value, const std::vector<std::pair<std::string, Enum>>& table) {
  for (const auto& [name, e] : table)
    if (e == value) return name;
  return "unknown";
}

const std::vector<std::pair<std::string, Activation>>& activation_table() {
  static const std::vector<std::pair<std::string, Activation>> table = {
      {"gelu", Activation::kGelu},
      {"relu", Activation::kRelu},
      {"identity", Activation::kIdentity},
  };
  return table;
}

const std::vector<std::pair<std::string, Readout>>& readout_table() {
  static const std::vector<std::pair<std::string, Readout>> table = {
      {"first_prompt", Readout::kFirstPrompt},
      {"last_token", Readout::kLastToken},
  };
  return table;
}

const std::vector<std::pair<std::string, CoverageMode>>& coverage_table() {
  static const std::vector<std::pair<std::string, CoverageMode>> table = {
      {"facility_location", CoverageMode::kFacilityLocation},
      {"pairwise_sum", CoverageMode::kPairwiseSum},
  };
  return table;
}

const std::vector<std::pair<std::string, PhiKind>>& phi_table() {
  static const std::vector<std::pair<std::string, PhiKind>> table = {
      {"shifted_cosine", PhiKind::kShiftedCosine},
      {"raw_cosine", PhiKind::kRawCosine},
  };
  return table;
}

const std::vector<std::pair<std::string, PsiKind>>& psi_table() {
  static const std::vector<std::pair<std::string, PsiKind>> table = {
      {"identity", PsiKind::kIdentity},
      {"sqrt", PsiKind::kSqrt},
      {"log1p", PsiKind::kLog1p},
  };
  return table;
}

const std::vector<std::pair<std::string, EncoderMode>>& encoder_table() {
  static const std::vector<std::pair<std::string, EncoderMode>> table = {
      {"file_backed", EncoderMode::kFileBacked},
      {"hash", EncoderMode::kHash},
  };
  return table;
}

const std::vector<std::pair<std::string, YPrimeRule>>& rule_table() {
  static const std::vector<std::pair<std::string, YPrimeRule>> table = {
      {"runner_up", YPrimeRule::kRunnerUp},
      {"least_probable", YPrimeRule::kLeastProbable},
      {"self", YPrimeRule::kSelf},
  };
  return table;
}

RunConfig config_from_json(const json& j) {
  expect_object(j, "config");
  expect_keys(j,
              {"paths", "classes", "seeds", "shots", "n_prompt", "model", "selection", "train",
               "tune", "encoder", "generator", "explain_top_k", "attribution_examples", "attack",
               "ig_steps", "shapley_samples", "correlation_top_k", "eval_cap", "factor_epsilon"},
              "config");

  RunConfig cfg;

  if (!j.contains("paths")) fail(ErrorKind::kConfigError, "config.paths is required");
  const json& paths = j.at("paths");
  expect_object(paths, "config.paths");
  expect_keys(paths, {"train", "test", "stub", "embeddings", "out"}, "config.paths");
  cfg.paths.train = req_str(paths, "train", "config.paths");
  cfg.paths.test = req_str(paths, "test", "config.paths");
  cfg.paths.stub = req_str(paths, "stub", "config.paths");
  cfg.paths.embeddings = req_str(paths, "embeddings", "config.paths");
  cfg.paths.out = req_str(paths, "out", "config.paths");

  if (!j.contains("classes") || !j.at("classes").is_array())
    fail(ErrorKind::kConfigError, "config.classes is required and must be an array");
  cfg.classes.clear();
  for (const json& c : j.at("classes")) {
    if (!c.is_string()) fail(ErrorKind::kConfigError, "config.classes entries must be strings");
    cfg.classes.push_back(c.get<std::string>());
  }

  if (j.contains("seeds")) {
    if (!j.at("seeds").is_array())
      fail(ErrorKind::kConfigError, "config.seeds must be an array");
    cfg.seeds.clear();
    for (const json& s : j.at("seeds")) {
      if (!s.is_number_integer() || s.get<double>() < 0)
        fail(ErrorKind::kConfigError, "config.seeds entries must be non-negative integers");
      cfg.seeds.push_back(s.get<std::uint64_t>());
    }
  }

  if (j.contains("shots")) {
    const json& shots = j.at("shots");
    if (shots.is_string()) {
      if (shots.get<std::string>() != "full")
        fail(ErrorKind::kConfigError, "config.shots string form must be \"full\"");
      cfg.shots = 0;
    } else if (shots.is_number_integer()) {
      cfg.shots = shots.get<int>();
    } else {
      fail(ErrorKind::kConfigError, "config.shots must be \"full\" or an integer");
    }
  }

  cfg.n_prompt = get_int(j, "n_prompt", cfg.n_prompt, "config");

  if (j.contains("model")) {
    const json& m = j.at("model");
    expect_object(m, "config.model");
    expect_keys(m,
                {"dim", "heads", "ffn_dim", "n_classes", "vocab_size", "activation", "readout",
                 "seed"},
                "config.model");
    const int n_classes = get_int(m, "n_classes", static_cast<int>(cfg.classes.size()),
                                  "config.model");
    if (n_classes != static_cast<int>(cfg.classes.size()))
      fail(ErrorKind::kConfigError, "config.model.n_classes must match config.classes");
    cfg.model.dim = get_int(m, "dim", cfg.model.dim, "config.model");
    cfg.model.heads = get_int(m, "heads", cfg.model.heads, "config.model");
    cfg.model.ffn_dim = get_int(m, "ffn_dim", cfg.model.ffn_dim, "config.model");
    cfg.model.vocab_size = get_int(m, "vocab_size", cfg.model.vocab_size, "config.model");
    cfg.model.activation = parse_enum(
        get_str(m, "activation", enum_name(cfg.model.activation, activation_table()),
                "config.model"),
        activation_table(), "config.model.activation");
    cfg.model.readout =
        parse_enum(get_str(m, "readout", enum_name(cfg.model.readout, readout_table()),
                           "config.model"),
                   readout_table(), "config.model.readout");
    cfg.model.seed = get_u64(m, "seed", cfg.model.seed, "config.model");
  }
  cfg.model.n_classes = static_cast<int>(cfg.classes.size());

  if (j.contains("selection")) {
    const json& s = j.at("selection");
    expect_object(s, "config.selection");
    expect_keys(s, {"k", "lambda", "temperature", "coverage", "phi", "psi", "signed_diversity"},
                "config.selection");
    cfg.selection.k = get_int(s, "k", cfg.selection.k, "config.selection");
    cfg.selection.lambda = get_num(s, "lambda", cfg.selection.lambda, "config.selection");
    cfg.selection.temperature =
        get_num(s, "temperature", cfg.selection.temperature, "config.selection");
    cfg.selection.coverage_mode = parse_enum(
        get_str(s, "coverage", enum_name(cfg.selection.coverage_mode, coverage_table()),
                "config.selection"),
        coverage_table(), "config.selection.coverage");
    cfg.selection.phi =
        parse_enum(get_str(s, "phi", enum_name(cfg.selection.phi, phi_table()),
                           "config.selection"),
                   phi_table(), "config.selection.phi");
    cfg.selection.psi =
        parse_enum(get_str(s, "psi", enum_name(cfg.selection.psi, psi_table()),
                           "config.selection"),
                   psi_table(), "config.selection.psi");
    cfg.selection.signed_diversity =
        get_bool(s, "signed_diversity", cfg.selection.signed_diversity, "config.selection");
  }

  if (j.contains("train")) {
    const json& t = j.at("train");
    expect_object(t, "config.train");
    expect_keys(t,
                {"lr", "weight_decay", "beta1", "beta2", "eps", "batch_size", "max_steps",
                 "patience", "eval_every", "val_fraction"},
                "config.train");
    cfg.train.lr = get_num(t, "lr", cfg.train.lr, "config.train");
    cfg.train.weight_decay = get_num(t, "weight_decay", cfg.train.weight_decay, "config.train");
    cfg.train.beta1 = get_num(t, "beta1", cfg.train.beta1, "config.train");
    cfg.train.beta2 = get_num(t, "beta2", cfg.train.beta2, "config.train");
    cfg.train.eps = get_num(t, "eps", cfg.train.eps, "config.train");
    cfg.train.batch_size = get_int(t, "batch_size", cfg.train.batch_size, "config.train");
    cfg.train.max_steps = get_int(t, "max_steps", cfg.train.max_steps, "config.train");
    cfg.train.patience = get_int(t, "patience", cfg.train.patience, "config.train");
    cfg.train.eval_every = get_int(t, "eval_every", cfg.train.eval_every, "config.train");
    cfg.train.val_fraction = get_num(t, "val_fraction", cfg.train.val_fraction, "config.train");
  }

  if (j.contains("tune")) {
    const json& t = j.at("tune");
    expect_object(t, "config.tune");
    expect_keys(t,
                {"mu", "lr", "weight_decay", "beta1", "beta2", "eps", "batch_size", "max_steps",
                 "patience", "eval_every", "val_fraction", "freeze_c"},
                "config.tune");
    cfg.tune.mu = get_num(t, "mu", cfg.tune.mu, "config.tune");
    cfg.tune.lr = get_num(t, "lr", cfg.tune.lr, "config.tune");
    cfg.tune.weight_decay = get_num(t, "weight_decay", cfg.tune.weight_decay, "config.tune");
    cfg.tune.beta1 = get_num(t, "beta1", cfg.tune.beta1, "config.tune");
    cfg.tune.beta2 = get_num(t, "beta2", cfg.tune.beta2, "config.tune");
    cfg.tune.eps = get_num(t, "eps", cfg.tune.eps, "config.tune");
    cfg.tune.batch_size = get_int(t, "batch_size", cfg.tune.batch_size, "config.tune");
    cfg.tune.max_steps = get_int(t, "max_steps", cfg.tune.max_steps, "config.tune");
    cfg.tune.patience = get_int(t, "patience", cfg.tune.patience, "config.tune");
    cfg.tune.eval_every = get_int(t, "eval_every", cfg.tune.eval_every, "config.tune");
    cfg.tune.val_fraction = get_num(t, "val_fraction", cfg.tune.val_fraction, "config.tune");
    cfg.tune.freeze_c = get_bool(t, "freeze_c", cfg.tune.freeze_c, "config.tune");
  }

  if (j.contains("encoder")) {
    const json& e = j.at("encoder");
    expect_object(e, "config.encoder");
    expect_keys(e, {"mode", "dim", "seed"}, "config.encoder");
    cfg.encoder.mode =
        parse_enum(get_str(e, "mode", enum_name(cfg.encoder.mode, encoder_table()),
                           "config.encoder"),
                   encoder_table(), "config.encoder.mode");
    cfg.encoder.dim = get_int(e, "dim", cfg.encoder.dim, "config.encoder");
    cfg.encoder.seed = get_u64(e, "seed", cfg.encoder.seed, "config.encoder");
  }

  if (j.contains("generator")) {
    const json& g = j.at("generator");
    expect_object(g, "config.generator");
    expect_keys(g, {"samples_per_prompt"}, "config.generator");
    cfg.samples_per_prompt =
        get_int(g, "samples_per_prompt", cfg.samples_per_prompt, "config.generator");
  }

  if (j.contains("attack")) {
    const json& a = j.at("attack");
    expect_object(a, "config.attack");
    expect_keys(a, {"rule", "top_k"}, "config.attack");
    cfg.attack_rule =
        parse_enum(get_str(a, "rule", enum_name(cfg.attack_rule, rule_table()), "config.attack"),
                   rule_table(), "config.attack.rule");
    cfg.attack_top_k = get_int(a, "top_k", cfg.attack_top_k, "config.attack");
  }

  cfg.explain_top_k = get_int(j, "explain_top_k", cfg.explain_top_k, "config");
  cfg.attribution_examples =
      get_int(j, "attribution_examples", cfg.attribution_examples, "config");
  cfg.ig_steps = get_int(j, "ig_steps", cfg.ig_steps, "config");
  cfg.shapley_samples = get_int(j, "shapley_samples", cfg.shapley_samples, "config");
  cfg.correlation_top_k = get_int(j, "correlation_top_k", cfg.correlation_top_k, "config");
  cfg.eval_cap = get_int(j, "eval_cap", cfg.eval_cap, "config");
  cfg.factor_epsilon = get_num(j, "factor_epsilon", cfg.factor_epsilon, "config");
  return cfg;
}

// ------------------------------------------------------------- artifacts --

std::filesystem::path seed_dir(const RunConfig& cfg, std::uint64_t seed) {
  return cfg.paths.out / ("seed-" + std::to_string(seed));
}

void require_artifact(const std::filesystem::path& path, const std::string& stage) {
  if (!std::filesystem::exists(path))
    fail(ErrorKind::kConfigError,
         "missing artifact " + path.string() + "; rerun the " + stage + " stage first");
}

void write_json_file(const std::filesystem::path& path, const json& j) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::kFileError, "cannot write " + path.string());
  out << j.dump(2) << "\n";
}

void write_text_file(const std::filesystem::path& path, const std::string& body) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::kFileError, "cannot write " + path.string());
  out << body;
}

std::string fmt_num(double v) {
  if (std::isnan(v)) return "nan";
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

std::string config_hash(const RunConfig& cfg) {
  const std::string dump = to_json(cfg).dump();
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(dump.data(), dump.size())));
  return buf;
}

std::string git_describe() {
  std::string out = "unknown";
  if (FILE* pipe = ::popen("git describe --always --dirty 2>/dev/null", "r")) {
    char buf[128];
    if (std::fgets(buf, sizeof(buf), pipe) != nullptr) {
      out = buf;
      while (!out.empty() && (out.back() == '\n' || out.back() == '\r')) out.pop_back();
    }
    ::pclose(pipe);
  }
  return out.empty() ? "unknown" : out;
}

class StageTimer {
 public:
  StageTimer() : start_(std::chrono::steady_clock::now()) {}
  double elapsed_ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

void write_manifest(const RunConfig& cfg, const std::string& stage,
                    std::vector<std::filesystem::path> artifacts, const StageTimer& timer) {
  json j;
  j["stage"] = stage;
  j["config_hash"] = config_hash(cfg);
  j["git_describe"] = git_describe();
  j["timings_ms"][stage] = timer.elapsed_ms();
  std::vector<std::string> rel;
  rel.reserve(artifacts.size());
  for (const auto& a : artifacts)
    rel.push_back(std::filesystem::relative(a, cfg.paths.out).generic_string());
  std::sort(rel.begin(), rel.end());
  j["artifacts"] = rel;
  write_json_file(cfg.paths.out / "manifests" / (stage + ".json"), j);
}

// --------------------------------------------------------- shared pieces --

Encoder make_encoder(const RunConfig& cfg) {
  if (cfg.encoder.mode == EncoderMode::kHash)
    return Encoder::hash_encoder(cfg.encoder.dim, cfg.encoder.seed);
  return Encoder::file_backed(cfg.paths.embeddings);
}

ToyTransformer make_model(const RunConfig& cfg, const Encoder& encoder) {
  if (encoder.dim() != cfg.model.dim)
    fail(ErrorKind::kConfigError,
         "encoder dimension " + std::to_string(encoder.dim()) + " does not match model dim " +
             std::to_string(cfg.model.dim));
  return ToyTransformer(cfg.model);
}

std::vector<LabeledText> shot_train(const RunConfig& cfg, std::uint64_t seed) {
  const std::vector<LabeledText> train = load_dataset(cfg.paths.train, cfg.classes);
  return stratified_shots(train, cfg.classes, cfg.shots, sub_seed(seed, kShotSalt));
}

std::vector<EmbeddedExample> capped_test(const RunConfig& cfg, const Encoder& encoder) {
  std::vector<LabeledText> test = load_dataset(cfg.paths.test, cfg.classes);
  if (cfg.eval_cap > 0 && test.size() > static_cast<std::size_t>(cfg.eval_cap))
    test.resize(static_cast<std::size_t>(cfg.eval_cap));
  return embed_dataset(encoder, test, cfg.classes);
}

std::vector<ClassEmbedding> class_embeddings(const Encoder& encoder,
                                             const std::vector<LabeledText>& data,
                                             const std::vector<std::string>& classes) {
  std::vector<ClassEmbedding> out;
  out.reserve(classes.size());
  for (const std::string& label : classes)
    out.push_back({label, mean_class_embedding(encoder, data, label)});
  return out;
}

std::vector<SelectedSet> select_for(const CandidatePool& pool,
                                    const std::vector<ClassEmbedding>& classes,
                                    const SelectionConfig& sel) {
  std::vector<SelectedSet> sets;
  sets.reserve(classes.size());
  for (const ClassEmbedding& cls : classes) {
    const SimilarityCache cache = build_similarity_cache(pool, cls.label, classes, sel);
    sets.push_back(lazy_greedy_select(cache, sel));
  }
  return sets;
}

SelectedSet selected_set_from_json(const json& j) {
  SelectedSet set;
  set.class_label = j.at("class").get<std::string>();
  set.k = j.at("k").get<int>();
  set.ids = j.at("ids").get<std::vector<int>>();
  set.gains = j.at("gains").get<std::vector<double>>();
  set.objective = j.at("objective").get<double>();
  return set;
}

std::vector<SelectedSet> load_selected(const RunConfig& cfg, std::uint64_t seed) {
  const std::filesystem::path path = seed_dir(cfg, seed) / "selected.json";
  require_artifact(path, "select");
  std::ifstream in(path);
  json j;
  try {
    j = json::parse(in);
    std::vector<SelectedSet> sets;
    for (const json& s : j.at("classes")) sets.push_back(selected_set_from_json(s));
    return sets;
  } catch (const json::exception& e) {
    fail(ErrorKind::kFormatError, path.string() + ": " + e.what());
  }
}

CandidatePool load_pool(const RunConfig& cfg) {
  const std::filesystem::path path = cfg.paths.out / "pool.jsonl";
  require_artifact(path, "gen");
  return CandidatePool::load(path);
}

Matrix load_p_star(const RunConfig& cfg, std::uint64_t seed) {
  const std::filesystem::path path = seed_dir(cfg, seed) / "p_star.cdem";
  require_artifact(path, "tune");
  return load_matrix(path);
}

Decomposition load_dec(const RunConfig& cfg, std::uint64_t seed) {
  const std::filesystem::path dir = seed_dir(cfg, seed) / "decomposition";
  require_artifact(dir / "decomposition.json", "tune");
  return load_decomposition(dir);
}

std::optional<double> correlation_or_null(const Decomposition& dec,
                                          const AttributionScores& scores, int top_k) {
  const auto n = static_cast<int>(dec.n_concepts());
  if (n < 2) return std::nullopt;
  return concept_correlation(dec, scores, std::min(top_k, n));
}

json correlation_json(const std::optional<double>& rho) {
  return rho.has_value() ? json(*rho) : json(nullptr);
}

struct SeedMetrics {
  double acc_ptune = 0.0;
  double acc_cd = 0.0;
  double fidelity = 0.0;
  std::optional<double> rho;
};

json aggregate_json(const std::vector<double>& values) {
  json j;
  if (values.empty()) {
    j["avg"] = nullptr;
    j["variance"] = nullptr;
    j["count"] = 0;
    return j;
  }
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var /= static_cast<double>(values.size());
  j["avg"] = mean;
  j["variance"] = var;
  j["count"] = values.size();
  return j;
}

}  // namespace

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kFileError, "cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorKind::kParseError, "config " + path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

void validate_run_config(const RunConfig& cfg) {
  if (cfg.classes.size() < 2) fail(ErrorKind::kConfigError, "config needs at least 2 classes");
  std::set<std::string> unique;
  for (const std::string& c : cfg.classes) {
    if (c.empty()) fail(ErrorKind::kConfigError, "class labels must be non-empty");
    if (!unique.insert(c).second)
      fail(ErrorKind::kConfigError, "duplicate class label '" + c + "'");
  }
  if (cfg.seeds.empty()) fail(ErrorKind::kConfigError, "config.seeds must be non-empty");
  static const std::set<int> kShotChoices = {0, 4, 8, 16, 32};
  if (kShotChoices.count(cfg.shots) == 0)
    fail(ErrorKind::kConfigError, "config.shots must be one of 4, 8, 16, 32, or \"full\"");
  if (cfg.n_prompt < 1) fail(ErrorKind::kConfigError, "config.n_prompt must be >= 1");
  if (cfg.paths.out.empty()) fail(ErrorKind::kConfigError, "config.paths.out must be non-empty");
  const std::pair<std::string, std::filesystem::path> datasets[] = {
      {"train", cfg.paths.train}, {"test", cfg.paths.test}};
  for (const auto& [name, path] : datasets) {
    if (!std::filesystem::exists(path))
      fail(ErrorKind::kConfigError, "config.paths." + name + " does not exist: " + path.string());
  }
  if (cfg.encoder.mode == EncoderMode::kFileBacked &&
      !std::filesystem::exists(cfg.paths.embeddings))
    fail(ErrorKind::kConfigError,
         "config.paths.embeddings does not exist: " + cfg.paths.embeddings.string());
  if (cfg.explain_top_k < 1) fail(ErrorKind::kConfigError, "config.explain_top_k must be >= 1");
  if (cfg.attack_top_k < 1) fail(ErrorKind::kConfigError, "config.attack.top_k must be >= 1");
  if (cfg.ig_steps < 1) fail(ErrorKind::kConfigError, "config.ig_steps must be >= 1");
  if (cfg.shapley_samples < 1)
    fail(ErrorKind::kConfigError, "config.shapley_samples must be >= 1");
  if (cfg.correlation_top_k < 2)
    fail(ErrorKind::kConfigError, "config.correlation_top_k must be >= 2");
  if (cfg.attribution_examples < 0)
    fail(ErrorKind::kConfigError, "config.attribution_examples must be >= 0");
  if (cfg.eval_cap < 0) fail(ErrorKind::kConfigError, "config.eval_cap must be >= 0");
  if (cfg.samples_per_prompt < 1)
    fail(ErrorKind::kConfigError, "config.generator.samples_per_prompt must be >= 1");
  if (!(cfg.factor_epsilon > 0.0))
    fail(ErrorKind::kConfigError, "config.factor_epsilon must be positive");
}

nlohmann::json to_json(const RunConfig& cfg) {
  json j;
  j["paths"]["train"] = cfg.paths.train.generic_string();
  j["paths"]["test"] = cfg.paths.test.generic_string();
  j["paths"]["stub"] = cfg.paths.stub.generic_string();
  j["paths"]["embeddings"] = cfg.paths.embeddings.generic_string();
  j["paths"]["out"] = cfg.paths.out.generic_string();
  j["classes"] = cfg.classes;
  j["seeds"] = cfg.seeds;
  j["shots"] = cfg.shots;
  j["n_prompt"] = cfg.n_prompt;
  j["model"]["dim"] = cfg.model.dim;
  j["model"]["heads"] = cfg.model.heads;
  j["model"]["ffn_dim"] = cfg.model.ffn_dim;
  j["model"]["n_classes"] = cfg.model.n_classes;
  j["model"]["vocab_size"] = cfg.model.vocab_size;
  j["model"]["activation"] = enum_name(cfg.model.activation, activation_table());
  j["model"]["readout"] = enum_name(cfg.model.readout, readout_table());
  j["model"]["seed"] = cfg.model.seed;
  j["selection"]["k"] = cfg.selection.k;
  j["selection"]["lambda"] = cfg.selection.lambda;
  j["selection"]["temperature"] = cfg.selection.temperature;
  j["selection"]["coverage"] = enum_name(cfg.selection.coverage_mode, coverage_table());
  j["selection"]["phi"] = enum_name(cfg.selection.phi, phi_table());
  j["selection"]["psi"] = enum_name(cfg.selection.psi, psi_table());
  j["selection"]["signed_diversity"] = cfg.selection.signed_diversity;
  j["train"]["lr"] = cfg.train.lr;
  j["train"]["weight_decay"] = cfg.train.weight_decay;
  j["train"]["beta1"] = cfg.train.beta1;
  j["train"]["beta2"] = cfg.train.beta2;
  j["train"]["eps"] = cfg.train.eps;
  j["train"]["batch_size"] = cfg.train.batch_size;
  j["train"]["max_steps"] = cfg.train.max_steps;
  j["train"]["patience"] = cfg.train.patience;
  j["train"]["eval_every"] = cfg.train.eval_every;
  j["train"]["val_fraction"] = cfg.train.val_fraction;
  j["tune"]["mu"] = cfg.tune.mu;
  j["tune"]["lr"] = cfg.tune.lr;
  j["tune"]["weight_decay"] = cfg.tune.weight_decay;
  j["tune"]["beta1"] = cfg.tune.beta1;
  j["tune"]["beta2"] = cfg.tune.beta2;
  j["tune"]["eps"] = cfg.tune.eps;
  j["tune"]["batch_size"] = cfg.tune.batch_size;
  j["tune"]["max_steps"] = cfg.tune.max_steps;
  j["tune"]["patience"] = cfg.tune.patience;
  j["tune"]["eval_every"] = cfg.tune.eval_every;
  j["tune"]["val_fraction"] = cfg.tune.val_fraction;
  j["tune"]["freeze_c"] = cfg.tune.freeze_c;
  j["encoder"]["mode"] = enum_name(cfg.encoder.mode, encoder_table());
  j["encoder"]["dim"] = cfg.encoder.dim;
  j["encoder"]["seed"] = cfg.encoder.seed;
  j["generator"]["samples_per_prompt"] = cfg.samples_per_prompt;
  j["explain_top_k"] = cfg.explain_top_k;
  j["attribution_examples"] = cfg.attribution_examples;
  j["attack"]["rule"] = enum_name(cfg.attack_rule, rule_table());
  j["attack"]["top_k"] = cfg.attack_top_k;
  j["ig_steps"] = cfg.ig_steps;
  j["shapley_samples"] = cfg.shapley_samples;
  j["correlation_top_k"] = cfg.correlation_top_k;
  j["eval_cap"] = cfg.eval_cap;
  j["factor_epsilon"] = cfg.factor_epsilon;
  return j;
}

std::vector<EmbeddedExample> embed_dataset(const Encoder& encoder,
                                           const std::vector<LabeledText>& data,
                                           const std::vector<std::string>& classes) {
  std::vector<EmbeddedExample> out;
  out.reserve(data.size());
  for (const LabeledText& ex : data) {
    const auto it = std::find(classes.begin(), classes.end(), ex.label);
    if (it == classes.end())
      fail(ErrorKind::kSchemaError, "label '" + ex.label + "' is not a configured class");
    const std::vector<double> vec = encoder.embed(ex.text);
    EmbeddedExample e;
    e.input = Matrix(vec.size(), 1);
    e.input.set_col(0, vec);
    e.label = static_cast<int>(it - classes.begin());
    e.id = ex.text;
    out.push_back(std::move(e));
  }
  return out;
}

void run_gen(const RunConfig& cfg) {
  validate_run_config(cfg);
  const StageTimer timer;
  const Encoder encoder = make_encoder(cfg);
  GeneratorOptions options;
  const char* url = std::getenv("CD_GEN_URL");
  options.kind =
      (url != nullptr && *url != '\0') ? GeneratorKind::kHttp : GeneratorKind::kStub;
  options.stub_path = cfg.paths.stub;
  options.samples_per_prompt = cfg.samples_per_prompt;
  const CandidatePool pool =
      generate_candidates(default_templates(), cfg.classes, options, encoder);
  const std::filesystem::path pool_path = cfg.paths.out / "pool.jsonl";
  std::filesystem::create_directories(cfg.paths.out);
  pool.save(pool_path);
  write_manifest(cfg, "gen", {pool_path}, timer);
}

void run_select(const RunConfig& cfg) {
  validate_run_config(cfg);
  const StageTimer timer;
  const Encoder encoder = make_encoder(cfg);
  CandidatePool pool = load_pool(cfg);
  pool.ensure_embeddings(encoder);
  std::vector<std::filesystem::path> artifacts;
  for (const std::uint64_t seed : cfg.seeds) {
    const std::vector<LabeledText> shots = shot_train(cfg, seed);
    const std::vector<ClassEmbedding> classes = class_embeddings(encoder, shots, cfg.classes);
    const std::vector<SelectedSet> sets = select_for(pool, classes, cfg.selection);
    json j;
    j["seed"] = seed;
    j["shots"] = cfg.shots;
    j["classes"] = json::array();
    for (const SelectedSet& set : sets) j["classes"].push_back(to_json(set));
    const std::filesystem::path path = seed_dir(cfg, seed) / "selected.json";
    write_json_file(path, j);
    artifacts.push_back(path);
  }
  write_manifest(cfg, "select", std::move(artifacts), timer);
}

void run_tune(const RunConfig& cfg) {
  validate_run_config(cfg);
  const StageTimer timer;
  const Encoder encoder = make_encoder(cfg);
  CandidatePool pool = load_pool(cfg);
  pool.ensure_embeddings(encoder);
  const ToyTransformer model = make_model(cfg, encoder);
  const std::vector<EmbeddedExample> test = capped_test(cfg, encoder);
  std::vector<std::filesystem::path> artifacts;

  for (const std::uint64_t seed : cfg.seeds) {
    const std::vector<SelectedSet> selected = load_selected(cfg, seed);
    const std::vector<EmbeddedExample> train =
        embed_dataset(encoder, shot_train(cfg, seed), cfg.classes);

    TrainParams tp = cfg.train;
    tp.seed = sub_seed(seed, kTrainSalt);
    const TrainResult trained = p_tune(model, train, cfg.n_prompt, tp);
    const std::filesystem::path p_star_path = seed_dir(cfg, seed) / "p_star.cdem";
    std::filesystem::create_directories(seed_dir(cfg, seed));
    save_matrix(p_star_path, trained.prompt);
    artifacts.push_back(p_star_path);

    TuneConfig tc = cfg.tune;
    tc.seed = sub_seed(seed, kTuneSalt);
    const TuneResult tuned = cd_tune(model, trained.prompt, selected, pool, train, tc);
    const std::filesystem::path dec_dir = seed_dir(cfg, seed) / "decomposition";
    save_decomposition(tuned.decomposition, dec_dir);
    artifacts.push_back(dec_dir / "decomposition.json");

    json j;
    j["seed"] = seed;
    j["ptune"]["best_step"] = trained.best_step;
    j["ptune"]["best_val_loss"] = trained.best_val_loss;
    j["ptune"]["steps_run"] = trained.steps_run;
    j["ptune"]["acc_train"] = prompt_accuracy(model, trained.prompt, train);
    j["ptune"]["acc_test"] = prompt_accuracy(model, trained.prompt, test);
    j["cd"]["best_step"] = tuned.best_step;
    j["cd"]["steps_run"] = tuned.steps_run;
    j["cd"]["initial_val_loss"] = tuned.initial_val_loss;
    j["cd"]["best_val_loss"] = tuned.best_val_loss;
    j["cd"]["final_fidelity_kl"] = tuned.final_fidelity_kl;
    j["cd"]["n_concepts"] = tuned.decomposition.n_concepts();
    j["cd"]["residual"] = tuned.decomposition.residual;
    j["cd"]["acc_train"] = prompt_accuracy(model, tuned.decomposition.prompt(), train);
    j["cd"]["acc_test"] = prompt_accuracy(model, tuned.decomposition.prompt(), test);
    j["curves"]["ptune_train"] = trained.train_curve;
    j["curves"]["ptune_val"] = trained.val_curve;
    j["curves"]["cd_train"] = tuned.train_curve;
    j["curves"]["cd_val"] = tuned.val_curve;
    const std::filesystem::path report = seed_dir(cfg, seed) / "tune.json";
    write_json_file(report, j);
    artifacts.push_back(report);
  }
  write_manifest(cfg, "tune", std::move(artifacts), timer);
}

void run_explain(const RunConfig& cfg) {
  validate_run_config(cfg);
  const StageTimer timer;
  const Encoder encoder = make_encoder(cfg);
  CandidatePool pool = load_pool(cfg);
  pool.ensure_embeddings(encoder);
  const ToyTransformer model = make_model(cfg, encoder);
  const std::vector<EmbeddedExample> test = capped_test(cfg, encoder);
  std::vector<std::filesystem::path> artifacts;

  for (const std::uint64_t seed : cfg.seeds) {
    const Decomposition dec = load_dec(cfg, seed);
    const auto n_concepts = dec.n_concepts();
    std::string body;
    for (std::size_t i = 0; i < test.size(); ++i) {
      const EmbeddedExample& ex = test[i];
      json line;
      line["explanation"] = to_json(explain(model, dec, ex, pool, cfg.classes,
                                            cfg.explain_top_k));
      const AttributionScores grad = grad_attribution(model, dec, ex);
      line["attributions"]["grad"]["scores"] = grad.scores;
      line["correlations"]["grad"] =
          correlation_json(correlation_or_null(dec, grad, cfg.correlation_top_k));
      if (i < static_cast<std::size_t>(cfg.attribution_examples)) {
        const AttributionScores ig = integrated_gradients(model, dec, ex, cfg.ig_steps);
        line["attributions"]["integrated_gradients"]["scores"] = ig.scores;
        line["attributions"]["integrated_gradients"]["steps"] = ig.ig_steps;
        line["correlations"]["integrated_gradients"] =
            correlation_json(correlation_or_null(dec, ig, cfg.correlation_top_k));
        AttributionScores shap;
        if (n_concepts <= 12) {
          shap = shapley_attribution(model, dec, ex, ShapleyMode::kExact);
        } else {
          shap = shapley_attribution(model, dec, ex, ShapleyMode::kMonteCarlo,
                                     cfg.shapley_samples,
                                     splitmix64(sub_seed(seed, kShapleySalt) ^ i));
          line["attributions"]["shapley"]["stderr"] = shap.mc_stderr;
          line["attributions"]["shapley"]["samples"] = shap.mc_samples;
        }
        line["attributions"]["shapley"]["scores"] = shap.scores;
        line["correlations"]["shapley"] =
            correlation_json(correlation_or_null(dec, shap, cfg.correlation_top_k));
      }
      body += line.dump();
      body += "\n";
    }
    const std::filesystem::path path = seed_dir(cfg, seed) / "explanations.jsonl";
    write_text_file(path, body);
    artifacts.push_back(path);
  }
  write_manifest(cfg, "explain", std::move(artifacts), timer);
}

void run_attack(const RunConfig& cfg) {
  validate_run_config(cfg);
  const StageTimer timer;
  const Encoder encoder = make_encoder(cfg);
  CandidatePool pool = load_pool(cfg);
  pool.ensure_embeddings(encoder);
  const ToyTransformer model = make_model(cfg, encoder);
  const std::vector<EmbeddedExample> test = capped_test(cfg, encoder);
  std::vector<std::filesystem::path> artifacts;

  for (const std::uint64_t seed : cfg.seeds) {
    const Decomposition dec = load_dec(cfg, seed);
    const std::vector<EmbeddedExample> bad = find_bad_cases(model, dec, test);
    const AttackReport report =
        causal_attack(model, dec, bad, pool, cfg.classes, cfg.attack_rule, cfg.attack_top_k);
    json j;
    j["seed"] = seed;
    j["rule"] = enum_name(cfg.attack_rule, rule_table());
    j["top_k"] = cfg.attack_top_k;
    j["n_bad_cases"] = bad.size();
    j["report"] = to_json(report);
    const std::filesystem::path path = seed_dir(cfg, seed) / "attack.json";
    write_json_file(path, j);
    artifacts.push_back(path);
  }
  write_manifest(cfg, "attack", std::move(artifacts), timer);
}

void run_eval(const RunConfig& cfg) {
  validate_run_config(cfg);
  const StageTimer timer;
  const Encoder encoder = make_encoder(cfg);
  const ToyTransformer model = make_model(cfg, encoder);
  const std::vector<EmbeddedExample> test = capped_test(cfg, encoder);

  std::map<std::uint64_t, SeedMetrics> per_seed;
  for (const std::uint64_t seed : cfg.seeds) {
    const Matrix p_star = load_p_star(cfg, seed);
    const Decomposition dec = load_dec(cfg, seed);
    SeedMetrics m;
    m.acc_ptune = prompt_accuracy(model, p_star, test);
    m.acc_cd = prompt_accuracy(model, dec.prompt(), test);
    m.fidelity = fidelity_kl(model, p_star, dec.prompt(), test);
    double rho_sum = 0.0;
    std::size_t rho_count = 0;
    for (const EmbeddedExample& ex : test) {
      const auto rho =
          correlation_or_null(dec, grad_attribution(model, dec, ex), cfg.correlation_top_k);
      if (rho.has_value()) {
        rho_sum += *rho;
        ++rho_count;
      }
    }
    if (rho_count > 0) m.rho = rho_sum / static_cast<double>(rho_count);
    per_seed[seed] = m;
  }

  json j;
  j["seeds"] = cfg.seeds;
  j["n_test"] = test.size();
  std::vector<double> acc_p;
  std::vector<double> acc_c;
  std::vector<double> fid;
  std::vector<double> rho;
  for (const std::uint64_t seed : cfg.seeds) {
    const SeedMetrics& m = per_seed.at(seed);
    json row;
    row["acc_ptune"] = m.acc_ptune;
    row["acc_cd"] = m.acc_cd;
    row["fidelity_kl"] = m.fidelity;
    row["rho_grad"] = correlation_json(m.rho);
    j["per_seed"][std::to_string(seed)] = row;
    acc_p.push_back(m.acc_ptune);
    acc_c.push_back(m.acc_cd);
    fid.push_back(m.fidelity);
    if (m.rho.has_value()) rho.push_back(*m.rho);
  }
  j["aggregate"]["acc_ptune"] = aggregate_json(acc_p);
  j["aggregate"]["acc_cd"] = aggregate_json(acc_c);
  j["aggregate"]["fidelity_kl"] = aggregate_json(fid);
  j["aggregate"]["rho_grad"] = aggregate_json(rho);
  const std::filesystem::path json_path = cfg.paths.out / "eval.json";
  write_json_file(json_path, j);

  std::string csv = "metric";
  for (const std::uint64_t seed : cfg.seeds) csv += ",seed-" + std::to_string(seed);
  csv += ",avg,variance\n";
  auto csv_row = [&](const std::string& name, auto value_of, const std::vector<double>& all) {
    csv += name;
    for (const std::uint64_t seed : cfg.seeds) csv += "," + fmt_num(value_of(per_seed.at(seed)));
    double mean = std::numeric_limits<double>::quiet_NaN();
    double var = std::numeric_limits<double>::quiet_NaN();
    if (!all.empty()) {
      mean = 0.0;
      for (double v : all) mean += v;
      mean /= static_cast<double>(all.size());
      var = 0.0;
      for (double v : all) var += (v - mean) * (v - mean);
      var /= static_cast<double>(all.size());
    }
    csv += "," + fmt_num(mean) + "," + fmt_num(var) + "\n";
  };
  csv_row("acc_ptune", [](const SeedMetrics& m) { return m.acc_ptune; }, acc_p);
  csv_row("acc_cd", [](const SeedMetrics& m) { return m.acc_cd; }, acc_c);
  csv_row("fidelity_kl", [](const SeedMetrics& m) { return m.fidelity; }, fid);
  csv_row("rho_grad",
          [](const SeedMetrics& m) {
            return m.rho.value_or(std::numeric_limits<double>::quiet_NaN());
          },
          rho);
  const std::filesystem::path csv_path = cfg.paths.out / "eval.csv";
  write_text_file(csv_path, csv);
  write_manifest(cfg, "eval", {json_path, csv_path}, timer);
}

void run_sweep_k(const RunConfig& cfg, std::vector<int> ks) {
  validate_run_config(cfg);
  if (ks.empty()) ks = {1, 5, 10, 15, 20};
  for (int k : ks)
    if (k < 1) fail(ErrorKind::kConfigError, "sweep k values must be >= 1");
  const StageTimer timer;
  const Encoder encoder = make_encoder(cfg);
  CandidatePool pool = load_pool(cfg);
  pool.ensure_embeddings(encoder);
  const ToyTransformer model = make_model(cfg, encoder);
  const std::vector<EmbeddedExample> test = capped_test(cfg, encoder);

  const std::uint64_t seed = cfg.seeds.front();
  const Matrix p_star = load_p_star(cfg, seed);
  const std::vector<LabeledText> shots = shot_train(cfg, seed);
  const std::vector<EmbeddedExample> train = embed_dataset(encoder, shots, cfg.classes);
  const std::vector<ClassEmbedding> classes = class_embeddings(encoder, shots, cfg.classes);

  json rows = json::array();
  std::string csv = "k,n_concepts,acc_cd,fidelity_kl\n";
  for (const int k : ks) {
    SelectionConfig sel = cfg.selection;
    sel.k = k;
    const std::vector<SelectedSet> sets = select_for(pool, classes, sel);
    TuneConfig tc = cfg.tune;
    tc.seed = splitmix64(sub_seed(seed, kTuneSalt) ^ static_cast<std::uint64_t>(k));
    const TuneResult tuned = cd_tune(model, p_star, sets, pool, train, tc);
    const double acc = prompt_accuracy(model, tuned.decomposition.prompt(), test);
    json row;
    row["k"] = k;
    row["n_concepts"] = tuned.decomposition.n_concepts();
    row["acc_cd"] = acc;
    row["fidelity_kl"] = tuned.final_fidelity_kl;
    rows.push_back(row);
    csv += std::to_string(k) + "," + std::to_string(tuned.decomposition.n_concepts()) + "," +
           fmt_num(acc) + "," + fmt_num(tuned.final_fidelity_kl) + "\n";
  }
  json j;
  j["seed"] = seed;
  j["rows"] = rows;
  const std::filesystem::path json_path = cfg.paths.out / "sweep_k.json";
  const std::filesystem::path csv_path = cfg.paths.out / "sweep_k.csv";
  write_json_file(json_path, j);
  write_text_file(csv_path, csv);
  write_manifest(cfg, "sweep-k", {json_path, csv_path}, timer);
}

void run_factor(const RunConfig& cfg, const std::filesystem::path& p_file,
                std::vector<int> n_concepts) {
  validate_run_config(cfg);
  const StageTimer timer;
  std::filesystem::path source = p_file;
  if (source.empty()) {
    source = seed_dir(cfg, cfg.seeds.front()) / "p_star.cdem";
    require_artifact(source, "tune");
  } else if (!std::filesystem::exists(source)) {
    fail(ErrorKind::kConfigError, "prompt tensor file not found: " + source.string());
  }
  const Matrix p = load_matrix(source);
  const std::size_t full_rank = std::min(p.rows(), p.cols());
  if (n_concepts.empty())
    for (std::size_t n = 1; n <= full_rank; ++n) n_concepts.push_back(static_cast<int>(n));
  for (int n : n_concepts)
    if (n < 1) fail(ErrorKind::kConfigError, "factor n_concepts values must be >= 1");

  const SvdResult decomposed = svd(p);
  json rows = json::array();
  for (const int n : n_concepts) {
    const Decomposition dec = frobenius_fit(p, n, cfg.factor_epsilon);
    const std::size_t rank = std::min(static_cast<std::size_t>(n), full_rank);
    const double bound = decomposed.tail_energy(rank);
    json row;
    row["n_concepts"] = n;
    row["residual"] = dec.residual;
    row["svd_optimum"] = bound;
    row["gap"] = dec.residual - bound;
    row["within_epsilon"] = dec.within_epsilon;
    rows.push_back(row);
  }
  json j;
  j["source"] = source.generic_string();
  j["rows"] = p.rows();
  j["cols"] = p.cols();
  j["epsilon"] = cfg.factor_epsilon;
  j["report"] = rows;
  const std::filesystem::path path = cfg.paths.out / "factor_report.json";
  write_json_file(path, j);
  write_manifest(cfg, "factor", {path}, timer);
}

}  // namespace cd
