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

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cd/candidates.hpp"
#include "cd/error.hpp"
#include "cd/pipeline.hpp"
#include "cd/synthetic.hpp"

namespace {

// 2: bad input or a missing upstream artifact, rerun the named stage.
// 3: runtime failure while producing artifacts (I/O, generation, training).
int exit_code_for(cd::ErrorKind kind) {
  switch (kind) {
    case cd::ErrorKind::kConfigError:
    case cd::ErrorKind::kInvalidInput:
    case cd::ErrorKind::kParseError:
    case cd::ErrorKind::kSchemaError:
    case cd::ErrorKind::kShapeError:
    case cd::ErrorKind::kFormatError:
    case cd::ErrorKind::kBudgetError:
      return 2;
    default:
      return 3;
  }
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) cd::fail(cd::ErrorKind::kFileError, "cannot open " + path.string());
  return nlohmann::json::parse(in);
}

void print_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) std::printf("%s\n", line.c_str());
}

struct CommonArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;

  cd::RunConfig load() const {
    if (!std::filesystem::exists(config))
      cd::fail(cd::ErrorKind::kConfigError, "config file not found: " + config);
    cd::RunConfig cfg = cd::load_run_config(config);
    if (seed.has_value()) cfg.seeds = {*seed};
    if (!out.empty()) cfg.paths.out = out;
    return cfg;
  }
};

void add_common(CLI::App* sub, CommonArgs& args) {
  sub->add_option("--config", args.config, "pipeline config JSON")->required();
  sub->add_option("--seed", args.seed, "run only this seed (overrides config.seeds)");
  sub->add_option("--out", args.out, "artifact directory (overrides config.paths.out)");
}

void print_gen_summary(const cd::RunConfig& cfg) {
  const cd::CandidatePool pool = cd::CandidatePool::load(cfg.paths.out / "pool.jsonl");
  std::printf("gen: %zu candidates\n", pool.size());
  for (const std::string& label : pool.class_labels())
    std::printf("  %-16s %zu\n", label.c_str(), pool.of_class(label).size());
}

void print_tune_summary(const cd::RunConfig& cfg) {
  for (const std::uint64_t seed : cfg.seeds) {
    const auto j =
        read_json(cfg.paths.out / ("seed-" + std::to_string(seed)) / "tune.json");
    std::printf("tune: seed %llu acc_ptune=%.4f acc_cd=%.4f fidelity_kl=%.6g\n",
                static_cast<unsigned long long>(seed),
                j.at("ptune").at("acc_test").get<double>(),
                j.at("cd").at("acc_test").get<double>(),
                j.at("cd").at("final_fidelity_kl").get<double>());
  }
}

void print_attack_summary(const cd::RunConfig& cfg) {
  for (const std::uint64_t seed : cfg.seeds) {
    const auto j =
        read_json(cfg.paths.out / ("seed-" + std::to_string(seed)) / "attack.json");
    const auto& report = j.at("report");
    std::printf("attack: seed %llu cases=%zu mean_pre=%.4f mean_post=%.4f delta=%.4f\n",
                static_cast<unsigned long long>(seed),
                j.at("n_bad_cases").get<std::size_t>(),
                report.at("mean_pre").get<double>(), report.at("mean_post").get<double>(),
                report.at("delta").get<double>());
  }
}

void print_factor_table(const cd::RunConfig& cfg) {
  const auto j = read_json(cfg.paths.out / "factor_report.json");
  std::printf("factor: %s (%zu x %zu)\n", j.at("source").get<std::string>().c_str(),
              j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>());
  std::printf("  %-12s %-16s %-16s %-16s\n", "n_concepts", "residual", "svd_optimum", "gap");
  for (const auto& row : j.at("report")) {
    std::printf("  %-12d %-16.8e %-16.8e %-16.8e\n", row.at("n_concepts").get<int>(),
                row.at("residual").get<double>(), row.at("svd_optimum").get<double>(),
                row.at("gap").get<double>());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"soft prompt concept decomposition pipeline"};
  app.require_subcommand(1);

  CommonArgs gen_args;
  CLI::App* gen = app.add_subcommand("gen", "generate the candidate concept pool");
  add_common(gen, gen_args);
  gen->callback([&] {
    const cd::RunConfig cfg = gen_args.load();
    cd::run_gen(cfg);
    print_gen_summary(cfg);
  });

  CommonArgs select_args;
  CLI::App* select = app.add_subcommand("select", "pick concept sets per class");
  add_common(select, select_args);
  select->callback([&] {
    const cd::RunConfig cfg = select_args.load();
    cd::run_select(cfg);
    std::printf("select: wrote selected.json for %zu seed(s)\n", cfg.seeds.size());
  });

  CommonArgs tune_args;
  CLI::App* tune = app.add_subcommand("tune", "prompt-tune, then distill into concepts");
  add_common(tune, tune_args);
  tune->callback([&] {
    const cd::RunConfig cfg = tune_args.load();
    cd::run_tune(cfg);
    print_tune_summary(cfg);
  });

  CommonArgs factor_args;
  std::string factor_p_file;
  std::vector<int> factor_n_concepts;
  CLI::App* factor = app.add_subcommand("factor", "residual vs rank-k optimum report");
  add_common(factor, factor_args);
  factor->add_option("--p-file", factor_p_file, "prompt tensor to factor");
  factor->add_option("--n-concepts", factor_n_concepts, "concept counts to sweep");
  factor->callback([&] {
    const cd::RunConfig cfg = factor_args.load();
    cd::run_factor(cfg, factor_p_file, factor_n_concepts);
    print_factor_table(cfg);
  });

  CommonArgs explain_args;
  CLI::App* explain = app.add_subcommand("explain", "rank concepts for every test input");
  add_common(explain, explain_args);
  explain->callback([&] {
    const cd::RunConfig cfg = explain_args.load();
    cd::run_explain(cfg);
    std::printf("explain: wrote explanations.jsonl for %zu seed(s)\n", cfg.seeds.size());
  });

  CommonArgs attack_args;
  CLI::App* attack = app.add_subcommand("attack", "explanation swap diagnostic on bad cases");
  add_common(attack, attack_args);
  attack->callback([&] {
    const cd::RunConfig cfg = attack_args.load();
    cd::run_attack(cfg);
    print_attack_summary(cfg);
  });

  CommonArgs eval_args;
  CLI::App* eval = app.add_subcommand("eval", "aggregate metrics across seeds");
  add_common(eval, eval_args);
  eval->callback([&] {
    const cd::RunConfig cfg = eval_args.load();
    cd::run_eval(cfg);
    print_file(cfg.paths.out / "eval.csv");
  });

  CommonArgs sweep_args;
  std::vector<int> sweep_ks;
  CLI::App* sweep = app.add_subcommand("sweep-k", "re-select and re-tune over budgets k");
  add_common(sweep, sweep_args);
  sweep->add_option("--ks", sweep_ks, "budgets to sweep (default 1 5 10 15 20)");
  sweep->callback([&] {
    const cd::RunConfig cfg = sweep_args.load();
    cd::run_sweep_k(cfg, sweep_ks);
    print_file(cfg.paths.out / "sweep_k.csv");
  });

  std::string fixture_out;
  std::vector<std::string> fixture_labels;
  cd::SyntheticSpec fixture_spec;
  CLI::App* fixture = app.add_subcommand("fixture", "write a synthetic classification fixture");
  fixture->add_option("--out", fixture_out, "output directory")->required();
  fixture->add_option("--dim", fixture_spec.dim, "embedding dimension");
  fixture->add_option("--train-per-class", fixture_spec.train_per_class);
  fixture->add_option("--test-per-class", fixture_spec.test_per_class);
  fixture->add_option("--concepts-per-class", fixture_spec.concepts_per_class);
  fixture->add_option("--example-noise", fixture_spec.example_noise);
  fixture->add_option("--concept-noise", fixture_spec.concept_noise);
  fixture->add_option("--label-flip", fixture_spec.label_flip_fraction,
                      "fraction of test labels flipped to the next class");
  fixture->add_option("--seed", fixture_spec.seed);
  fixture->add_option("--labels", fixture_labels, "class labels (default: circle square)");
  fixture->callback([&] {
    if (!fixture_labels.empty()) fixture_spec.labels = fixture_labels;
    const cd::SyntheticData data = cd::make_synthetic(fixture_spec);
    cd::write_synthetic(data, fixture_out);
    std::printf("fixture: wrote %s (%zu train, %zu test, %zu concepts)\n",
                fixture_out.c_str(), data.train.size(), data.test.size(),
                data.concepts.size());
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const cd::Error& e) {
    std::fprintf(stderr, "cdtool: %s: %s\n", cd::error_kind_name(e.kind()), e.what());
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "cdtool: %s\n", e.what());
    return 3;
  }
  return 0;
}
