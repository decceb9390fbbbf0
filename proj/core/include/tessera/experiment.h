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

// Config-driven experiment runner.
//
// An experiment is four stages that communicate only through files in the
// output directory:
//
//   gen-data   data.csv, data.meta.json
//   train      model.json, loss_history.csv, mc_dropout.json
//   calibrate  calibration_<scale>.json
//   evaluate   metrics_<method>.json, curves/*.csv, disentanglement.json
//
// Every stage records itself in manifest.json. run_experiment() chains the
// stages, so running them one by one produces the same bytes.

#ifndef TESSERA_EXPERIMENT_H_
#define TESSERA_EXPERIMENT_H_

#include <cstdint>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tessera/conformal.h"
#include "tessera/dataset.h"
#include "tessera/mc_dropout.h"
#include "tessera/metrics.h"
#include "tessera/moe.h"

namespace tessera {

enum class Method {
  kTesseraE,
  kTesseraA,
  kClassicalCp,
  kMoeE,
  kMoeA,
  kMcDropout,
};

std::string method_name(Method m);
Method method_from_name(const std::string& name);
std::vector<Method> all_methods();

struct DataSpec {
  std::string source = "generator";  // generator | csv
  std::string generator = "heteroscedastic";  // | clustered_shift
  std::size_t n = 5000;
  int d = 4;
  NoiseProfile noise = noise_profile_from_name("step");
  ClusterShiftConfig clusters;
  std::string csv_path;
};

struct SplitSpec {
  SplitMode mode = SplitMode::kRandom;
  SplitFractions fractions;
};

struct CalibrationSpec {
  double alpha = 0.10;
  double epsilon = kDefaultScoreEpsilon;
};

struct MetricSpec {
  std::vector<double> cwc_etas = {10.0, 50.0, 100.0};
  double cwc_eta = 50.0;
  std::vector<int> ssc_bins = {3, 5, 10};
  std::vector<double> sparsification_grid = default_sparsification_grid();
  std::size_t group_min_count = 10;
  std::size_t group_top_k = 15;
};

struct ExperimentConfig {
  static constexpr int kSchemaVersion = 1;
  std::uint64_t seed = 0;
  std::string output_dir = "out";
  std::vector<Method> methods = all_methods();
  DataSpec data;
  SplitSpec split;
  MoeConfig model;  // input_dim is taken from the data
  TrainConfig training{.epochs = 200, .batch_size = 32,
                       .learning_rate = 1e-4, .seed = 0};
  McDropoutConfig mc_dropout;
  CalibrationSpec calibration;
  MetricSpec metrics;
};

// Strict parse: unknown keys, wrong types and out-of-range values throw
// ConfigError. Missing keys keep their defaults.
ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& config);
ExperimentConfig load_config(const std::string& path);

// Hex FNV-1a of the canonical config JSON, excluding output_dir.
std::string config_hash(const ExperimentConfig& config);

// Everything computed for one method on the test split.
struct MethodEvaluation {
  MetricsReport report;
  SparsificationCurve sparsification;
  std::map<int, std::vector<SscBin>> ssc;
  std::optional<GroupCoverageTable> groups;
};

// Metrics for one set of test intervals. `uncertainty` orders the
// sparsification curve; `nll` is passed through. `groups` may be empty.
MethodEvaluation evaluate_intervals(const std::string& method,
                                    std::span<const PredictionInterval> intervals,
                                    std::span<const double> labels,
                                    std::span<const double> uncertainty,
                                    double nll,
                                    std::span<const std::string> groups,
                                    double alpha, const MetricSpec& spec);

void stage_gen_data(const ExperimentConfig& config);
void stage_train(const ExperimentConfig& config);
void stage_calibrate(const ExperimentConfig& config);
void stage_evaluate(const ExperimentConfig& config);

// Runs all stages. Returns 0 on success; on failure the manifest is marked
// partial with the failing stage and error, and 1 is returned.
int run_experiment(const ExperimentConfig& config);

// Merges metrics_<method>.json across run directories into mean and sample
// standard deviation per metric; writes report.json and report.csv into
// `out_dir` and returns the rendered text table.
std::string report_runs(const std::vector<std::string>& run_dirs,
                        const std::string& out_dir);

}  // namespace tessera

#endif  // TESSERA_EXPERIMENT_H_
