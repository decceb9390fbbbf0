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

#include "tessera/experiment.h"

#include <filesystem>
#include <string>
#include <vector>

#include "gtest/gtest.h"
#include "tessera/error.h"
#include "tessera/io.h"

namespace tessera {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "tessera_experiment_test" / name;
  fs::remove_all(dir);
  return dir;
}

ExperimentConfig small_config(const fs::path& dir, std::uint64_t seed = 7) {
  ExperimentConfig c;
  c.seed = seed;
  c.output_dir = dir.string();
  c.data.n = 800;
  c.data.d = 2;
  c.model.num_experts = 3;
  c.model.expert_hidden = 8;
  c.training.epochs = 3;
  c.training.learning_rate = 1e-3;
  c.mc_dropout.hidden = {8};
  c.mc_dropout.epochs = 2;
  c.mc_dropout.passes = 5;
  return c;
}

json read(const fs::path& p) { return read_json_file(p.string()); }

TEST(Config, RoundTripsThroughJson) {
  ExperimentConfig c = small_config("x");
  c.methods = {Method::kTesseraA, Method::kMcDropout};
  c.calibration.alpha = 0.2;
  const json j = config_to_json(c);
  EXPECT_EQ(config_to_json(config_from_json(j)), j);
  EXPECT_EQ(config_hash(config_from_json(j)), config_hash(c));
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  const json base = config_to_json(ExperimentConfig{});
  json j = base;
  j["trainig"] = json::object();
  EXPECT_THROW(config_from_json(j), ConfigError);
  j = base;
  j["training"]["epoch"] = 3;
  EXPECT_THROW(config_from_json(j), ConfigError);
  j = base;
  j["calibration"]["alpha"] = 1.5;
  EXPECT_THROW(config_from_json(j), ConfigError);
  j = base;
  j["seed"] = "seven";
  EXPECT_THROW(config_from_json(j), ConfigError);
  j = base;
  j["methods"] = {"tessera_e", "bogus"};
  EXPECT_THROW(config_from_json(j), ConfigError);
  EXPECT_NO_THROW(config_from_json(json::object()));
}

TEST(Config, HashIgnoresOutputDirOnly) {
  ExperimentConfig a = small_config("a"), b = small_config("b");
  EXPECT_EQ(config_hash(a), config_hash(b));
  b.seed = 8;
  EXPECT_NE(config_hash(a), config_hash(b));
  EXPECT_EQ(config_hash(a).size(), 16u);
}

TEST(Methods, NamesRoundTrip) {
  for (Method m : all_methods()) EXPECT_EQ(method_from_name(method_name(m)), m);
  EXPECT_EQ(all_methods().size(), 6u);
  EXPECT_THROW(method_from_name("tessera"), ConfigError);
}

TEST(Pipeline, StagesComposeToRunExperiment) {
  const fs::path staged = scratch("staged"), whole = scratch("whole");
  const ExperimentConfig a = small_config(staged);
  stage_gen_data(a);
  stage_train(a);
  stage_calibrate(a);
  stage_evaluate(a);
  ASSERT_EQ(run_experiment(small_config(whole)), 0);
  for (Method m : all_methods()) {
    const std::string name = "metrics_" + method_name(m) + ".json";
    EXPECT_EQ(read_text_file((staged / name).string()),
              read_text_file((whole / name).string()))
        << name;
  }
  EXPECT_EQ(read_text_file((staged / "manifest.json").string()),
            read_text_file((whole / "manifest.json").string()));
  EXPECT_EQ(read(whole / "manifest.json")["status"], "complete");
}

TEST(Pipeline, WritesDocumentedArtifacts) {
  const fs::path dir = scratch("artifacts");
  ASSERT_EQ(run_experiment(small_config(dir)), 0);
  for (const char* f :
       {"data.csv", "data.meta.json", "model.json", "loss_history.csv",
        "mc_dropout.json", "calibration_epistemic.json",
        "calibration_aleatoric.json", "calibration_constant.json",
        "curves/group_coverage.csv", "disentanglement.json",
        "curves/tessera_a_sparsification.csv", "curves/tessera_a_ssc_J5.csv",
        "manifest.json"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
  EXPECT_FALSE(fs::exists(dir / "curves/classical_cp_ssc_J5.csv"));
  const json cp = read(dir / "metrics_classical_cp.json");
  EXPECT_EQ(cp["ssc_note"], kConstantWidthSscError);
  const json manifest = read(dir / "manifest.json");
  EXPECT_EQ(manifest["seed"], 7);
  EXPECT_FALSE(manifest["config"].contains("output_dir"));
  EXPECT_EQ(manifest["stages"]["evaluate"]["status"], "ok");
}

TEST(Pipeline, ClassicalWidthsAreConstant) {
  const fs::path dir = scratch("constant");
  ExperimentConfig c = small_config(dir);
  c.methods = {Method::kClassicalCp};
  ASSERT_EQ(run_experiment(c), 0);
  const json m = read(dir / "metrics_classical_cp.json");
  const double q = m["calibration"]["q_hat"].get<double>();
  EXPECT_NEAR(m["mpiw"].get<double>(), 2.0 * q, 1e-12);
  EXPECT_EQ(m["ssc_note"], kConstantWidthSscError);
}

TEST(Pipeline, AlphaOverrideRecalibrates) {
  const fs::path dir = scratch("alpha");
  ExperimentConfig c = small_config(dir);
  c.methods = {Method::kTesseraA};
  ASSERT_EQ(run_experiment(c), 0);
  const double width_10 = read(dir / "metrics_tessera_a.json")["mpiw"].get<double>();
  c.calibration.alpha = 0.3;
  stage_evaluate(c);
  const json m = read(dir / "metrics_tessera_a.json");
  EXPECT_EQ(m["alpha"], 0.3);
  EXPECT_EQ(m["calibration"]["alpha"], 0.3);
  EXPECT_LT(m["mpiw"].get<double>(), width_10);
}

TEST(Pipeline, MissingArtifactIsDescriptive) {
  const fs::path dir = scratch("missing");
  const ExperimentConfig c = small_config(dir);
  try {
    stage_train(c);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("gen-data"), std::string::npos);
  }
  stage_gen_data(c);
  try {
    stage_calibrate(c);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("'train'"), std::string::npos);
  }
}

TEST(Pipeline, FailureMarksManifestPartial) {
  const fs::path dir = scratch("failing");
  ExperimentConfig c = small_config(dir);
  c.data.source = "csv";
  c.data.csv_path = (dir / "absent.csv").string();
  EXPECT_EQ(run_experiment(c), 1);
  const json manifest = read(dir / "manifest.json");
  EXPECT_EQ(manifest["status"], "partial");
  EXPECT_EQ(manifest["stages"]["gen-data"]["status"], "failed");
  EXPECT_TRUE(manifest["stages"]["gen-data"].contains("error"));
}

TEST(Report, MergesSeedsIntoMeanAndStd) {
  const fs::path root = scratch("report");
  std::vector<std::string> runs;
  for (std::uint64_t seed : {0, 11, 42}) {
    ExperimentConfig c = small_config(root / ("seed_" + std::to_string(seed)), seed);
    c.methods = {Method::kTesseraE, Method::kClassicalCp};
    ASSERT_EQ(run_experiment(c), 0);
    runs.push_back(c.output_dir);
  }
  const std::string table = report_runs(runs, root.string());
  EXPECT_NE(table.find("tessera_e"), std::string::npos);
  const json report = read(root / "report.json");
  const json& picp = report["methods"]["tessera_e"]["picp"];
  EXPECT_EQ(picp["n"], 3);
  std::vector<double> v;
  for (const std::string& r : runs) {
    v.push_back(read(fs::path(r) / "metrics_tessera_e.json")["picp"].get<double>());
  }
  const double mean = (v[0] + v[1] + v[2]) / 3.0;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  EXPECT_NEAR(picp["mean"].get<double>(), mean, 1e-15);
  EXPECT_NEAR(picp["std"].get<double>(), std::sqrt(ss / 2.0), 1e-15);
  EXPECT_FALSE(report["methods"].contains("mc_dropout"));
  EXPECT_TRUE(fs::exists(root / "report.csv"));
  EXPECT_THROW(report_runs({}, root.string()), ConfigError);
  EXPECT_THROW(report_runs({(root / "nowhere").string()}, root.string()), Error);
}

}  // namespace
}  // namespace tessera
