/*
 * Copyright 2026 The Tessera Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Command-line front end for the experiment stages.
//
//   tessera run       --config cfg.json [--seed S] [--alpha A] [--out DIR]
//   tessera gen-data  ...   (same flags; also train, calibrate, evaluate)
//   tessera report    --out DIR RUN_DIR...
//   tessera default-config

#include <CLI11.hpp>
#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "tessera/error.h"
#include "tessera/experiment.h"

namespace {

struct Flags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<double> alpha;
  std::optional<std::string> out;
  std::vector<std::string> methods;
};

void add_flags(CLI::App* cmd, Flags& flags) {
  cmd->add_option("--config", flags.config_path, "Experiment config (JSON)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--seed", flags.seed, "Override config seed");
  cmd->add_option("--alpha", flags.alpha, "Override miscoverage level")
      ->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--out", flags.out, "Override output directory");
  cmd->add_option("--method", flags.methods, "Methods to run")
      ->check(CLI::IsMember({"tessera_e", "tessera_a", "classical_cp", "moe_e",
                             "moe_a", "mc_dropout", "all"}))
      ->delimiter(',');
}

tessera::ExperimentConfig resolve(const Flags& flags) {
  tessera::ExperimentConfig config;
  if (!flags.config_path.empty()) {
    config = tessera::load_config(flags.config_path);
  }
  nlohmann::json j = tessera::config_to_json(config);
  if (flags.seed) j["seed"] = *flags.seed;
  if (flags.alpha) j["calibration"]["alpha"] = *flags.alpha;
  if (flags.out) j["output_dir"] = *flags.out;
  if (!flags.methods.empty()) j["methods"] = flags.methods;
  // Round-trip so that overrides go through the same validation.
  return tessera::config_from_json(j);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conformalized mixture-of-experts uncertainty experiments"};
  app.require_subcommand(1);

  Flags flags;
  using Stage = void (*)(const tessera::ExperimentConfig&);
  const std::pair<const char*, Stage> stages[] = {
      {"gen-data", tessera::stage_gen_data},
      {"train", tessera::stage_train},
      {"calibrate", tessera::stage_calibrate},
      {"evaluate", tessera::stage_evaluate},
  };
  std::vector<std::pair<CLI::App*, Stage>> stage_cmds;
  for (const auto& [name, fn] : stages) {
    CLI::App* cmd = app.add_subcommand(name, std::string("Run the ") + name +
                                                 " stage");
    add_flags(cmd, flags);
    stage_cmds.emplace_back(cmd, fn);
  }
  CLI::App* run = app.add_subcommand("run", "Run every stage in order");
  add_flags(run, flags);

  std::vector<std::string> run_dirs;
  std::string report_out = ".";
  CLI::App* report =
      app.add_subcommand("report", "Merge metrics across seed runs");
  report->add_option("runs", run_dirs, "Run output directories")
      ->required()
      ->check(CLI::ExistingDirectory);
  report->add_option("--out", report_out, "Where report.json/csv go");

  CLI::App* defaults =
      app.add_subcommand("default-config", "Print the default config");

  CLI11_PARSE(app, argc, argv);

  try {
    if (defaults->parsed()) {
      std::cout << tessera::config_to_json(tessera::ExperimentConfig{}).dump(2)
                << "\n";
      return 0;
    }
    if (report->parsed()) {
      std::cout << tessera::report_runs(run_dirs, report_out);
      return 0;
    }
    const tessera::ExperimentConfig config = resolve(flags);
    if (run->parsed()) {
      const int status = tessera::run_experiment(config);
      if (status != 0) {
        std::cerr << "error: experiment failed; see "
                  << config.output_dir << "/manifest.json\n";
      }
      return status;
    }
    for (const auto& [cmd, fn] : stage_cmds) {
      if (cmd->parsed()) fn(config);
    }
    return 0;
  } catch (const tessera::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
