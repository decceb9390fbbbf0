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

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <set>
#include <sstream>

#include "tessera/error.h"
#include "tessera/io.h"
#include "tessera/rng.h"
#include "tessera/stats.h"

namespace tessera {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr const char* kStages[] = {"gen-data", "train", "calibrate",
                                   "evaluate"};

// Strict reader for one JSON object: every key must be consumed.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path)
      : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + " must be a JSON object");
  }

  template <typename T>
  void read(const std::string& key, T& out) {
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    seen_.insert(key);
    try {
      out = it->template get<T>();
    } catch (const json::exception&) {
      throw ConfigError(path_ + "." + key + " has the wrong type");
    }
  }

  const json* child(const std::string& key) {
    const auto it = j_.find(key);
    if (it == j_.end()) return nullptr;
    seen_.insert(key);
    return &*it;
  }

  std::string path(const std::string& key) const { return path_ + "." + key; }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!seen_.count(item.key())) {
        throw ConfigError("unknown config key " + path_ + "." + item.key());
      }
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError("invalid config: " + what);
}

std::string shift_mode_name(ShiftMode m) {
  return m == ShiftMode::kOod ? "ood" : "iid";
}

std::string split_mode_name(SplitMode m) {
  return m == SplitMode::kRandom ? "random" : "by_group";
}

std::string path_in(const ExperimentConfig& c, const std::string& name) {
  return (fs::path(c.output_dir) / name).string();
}

bool has_method(const ExperimentConfig& c, Method m) {
  return std::find(c.methods.begin(), c.methods.end(), m) != c.methods.end();
}

std::vector<ScaleKind> needed_scales(const ExperimentConfig& c) {
  std::vector<ScaleKind> kinds;
  if (has_method(c, Method::kTesseraE)) kinds.push_back(ScaleKind::kEpistemic);
  if (has_method(c, Method::kTesseraA)) kinds.push_back(ScaleKind::kAleatoric);
  if (has_method(c, Method::kClassicalCp)) kinds.push_back(ScaleKind::kConstant);
  return kinds;
}

std::string calibration_file(ScaleKind kind) {
  return "calibration_" + scale_kind_name(kind) + ".json";
}

Rng root_rng(const ExperimentConfig& c) { return Rng(c.seed); }

void require_artifact(const ExperimentConfig& c, const std::string& name,
                      const std::string& producer) {
  if (!fs::exists(path_in(c, name))) {
    throw Error("missing upstream artifact '" + path_in(c, name) +
                "'; run the '" + producer + "' stage first");
  }
}

Dataset load_stage_data(const ExperimentConfig& c) {
  require_artifact(c, "data.csv", "gen-data");
  Dataset ds = load_csv(path_in(c, "data.csv"));
  if (!ds.has_splits()) {
    throw Error("data.csv has no split column; regenerate it with gen-data");
  }
  return ds;
}

MoeModel load_stage_model(const ExperimentConfig& c) {
  require_artifact(c, "model.json", "train");
  return load_checkpoint(path_in(c, "model.json"));
}

void update_manifest(const ExperimentConfig& c, const std::string& stage,
                     const std::vector<std::string>& artifacts,
                     const std::string& error = {}) {
  const std::string path = path_in(c, "manifest.json");
  const std::string hash = config_hash(c);
  json manifest;
  if (fs::exists(path)) {
    try {
      manifest = read_json_file(path);
    } catch (const Error&) {
      manifest = json();
    }
    if (!manifest.is_object() || manifest.value("config_hash", "") != hash) {
      manifest = json();
    }
  }
  if (manifest.is_null()) {
    json config_json = config_to_json(c);
    config_json.erase("output_dir");
    manifest = json{{"schema_version", ExperimentConfig::kSchemaVersion},
                    {"config_hash", hash},
                    {"seed", c.seed},
                    {"config", config_json},
                    {"stages", json::object()}};
  }
  std::vector<std::string> sorted = artifacts;
  std::sort(sorted.begin(), sorted.end());
  json entry{{"status", error.empty() ? "ok" : "failed"},
             {"artifacts", sorted}};
  if (!error.empty()) entry["error"] = error;
  manifest["stages"][stage] = entry;

  bool complete = true;
  for (const char* s : kStages) {
    const json& stages = manifest["stages"];
    if (!stages.contains(s) || stages[s].value("status", "") != "ok") {
      complete = false;
    }
  }
  manifest["status"] = complete ? "complete" : "partial";
  write_json_file(path, manifest);
}

std::string rows_to_csv(const std::string& header,
                        const std::vector<std::vector<std::string>>& rows) {
  std::string out = header + "\n";
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      out += row[i];
    }
    out += '\n';
  }
  return out;
}

std::vector<double> to_std(const Vector& v) {
  return {v.data(), v.data() + v.size()};
}

}  // namespace

std::string method_name(Method m) {
  switch (m) {
    case Method::kTesseraE:
      return "tessera_e";
    case Method::kTesseraA:
      return "tessera_a";
    case Method::kClassicalCp:
      return "classical_cp";
    case Method::kMoeE:
      return "moe_e";
    case Method::kMoeA:
      return "moe_a";
    case Method::kMcDropout:
      return "mc_dropout";
  }
  return "tessera_e";
}

Method method_from_name(const std::string& name) {
  for (Method m : all_methods()) {
    if (method_name(m) == name) return m;
  }
  throw ConfigError("unknown method '" + name + "'");
}

std::vector<Method> all_methods() {
  return {Method::kTesseraE, Method::kTesseraA, Method::kClassicalCp,
          Method::kMoeE,     Method::kMoeA,     Method::kMcDropout};
}

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  ObjectReader top(j, "config");
  int version = ExperimentConfig::kSchemaVersion;
  top.read("schema_version", version);
  require(version == ExperimentConfig::kSchemaVersion,
          "unsupported schema_version " + std::to_string(version));
  top.read("seed", c.seed);
  top.read("output_dir", c.output_dir);
  if (const json* m = top.child("methods")) {
    std::vector<std::string> names;
    try {
      names = m->get<std::vector<std::string>>();
    } catch (const json::exception&) {
      throw ConfigError("config.methods must be a list of strings");
    }
    c.methods.clear();
    for (const std::string& name : names) {
      if (name == "all") {
        c.methods = all_methods();
        break;
      }
      c.methods.push_back(method_from_name(name));
    }
    require(!c.methods.empty(), "methods must not be empty");
  }

  if (const json* d = top.child("data")) {
    ObjectReader r(*d, "config.data");
    r.read("source", c.data.source);
    r.read("generator", c.data.generator);
    r.read("n", c.data.n);
    r.read("d", c.data.d);
    r.read("csv_path", c.data.csv_path);
    if (const json* nz = r.child("noise")) {
      ObjectReader nr(*nz, r.path("noise"));
      std::string profile = noise_profile_name(c.data.noise.kind);
      nr.read("profile", profile);
      NoiseProfile p = noise_profile_from_name(profile);
      p.level = c.data.noise.level;
      p.base = c.data.noise.base;
      p.slope = c.data.noise.slope;
      p.low = c.data.noise.low;
      p.high = c.data.noise.high;
      p.threshold = c.data.noise.threshold;
      nr.read("level", p.level);
      nr.read("base", p.base);
      nr.read("slope", p.slope);
      nr.read("low", p.low);
      nr.read("high", p.high);
      nr.read("threshold", p.threshold);
      nr.finish();
      c.data.noise = p;
    }
    if (const json* cl = r.child("clusters")) {
      ObjectReader cr(*cl, r.path("clusters"));
      ClusterShiftConfig& k = c.data.clusters;
      cr.read("count", k.clusters);
      cr.read("held_out", k.held_out);
      cr.read("center_scale", k.center_scale);
      cr.read("held_out_radius", k.held_out_radius);
      cr.read("spread", k.cluster_spread);
      cr.read("noise", k.noise);
      std::string mode = shift_mode_name(k.mode);
      cr.read("mode", mode);
      require(mode == "ood" || mode == "iid", "clusters.mode is ood or iid");
      k.mode = mode == "ood" ? ShiftMode::kOod : ShiftMode::kIid;
      cr.finish();
    }
    r.finish();
  }

  if (const json* s = top.child("split")) {
    ObjectReader r(*s, "config.split");
    std::string mode = split_mode_name(c.split.mode);
    r.read("mode", mode);
    require(mode == "random" || mode == "by_group",
            "split.mode is random or by_group");
    c.split.mode = mode == "random" ? SplitMode::kRandom : SplitMode::kByGroup;
    if (const json* f = r.child("fractions")) {
      ObjectReader fr(*f, r.path("fractions"));
      fr.read("train", c.split.fractions.train);
      fr.read("val", c.split.fractions.validation);
      fr.read("cal", c.split.fractions.calibration);
      fr.read("test", c.split.fractions.test);
      fr.finish();
    }
    r.finish();
  }

  if (const json* m = top.child("model")) {
    ObjectReader r(*m, "config.model");
    r.read("experts", c.model.num_experts);
    r.read("expert_hidden", c.model.expert_hidden);
    std::string act = activation_name(c.model.expert_activation);
    r.read("expert_activation", act);
    c.model.expert_activation = activation_from_name(act);
    std::string gate = gate_kind_name(c.model.gate);
    r.read("gate", gate);
    c.model.gate = gate_kind_from_name(gate);
    r.read("gate_hidden", c.model.gate_hidden);
    r.read("variance_floor", c.model.variance_floor);
    r.finish();
  }

  if (const json* t = top.child("training")) {
    ObjectReader r(*t, "config.training");
    r.read("epochs", c.training.epochs);
    r.read("batch_size", c.training.batch_size);
    r.read("learning_rate", c.training.learning_rate);
    r.finish();
  }

  if (const json* md = top.child("mc_dropout")) {
    ObjectReader r(*md, "config.mc_dropout");
    r.read("hidden", c.mc_dropout.hidden);
    std::string act = activation_name(c.mc_dropout.activation);
    r.read("activation", act);
    c.mc_dropout.activation = activation_from_name(act);
    r.read("rate", c.mc_dropout.rate);
    r.read("learning_rate", c.mc_dropout.learning_rate);
    r.read("epochs", c.mc_dropout.epochs);
    r.read("batch_size", c.mc_dropout.batch_size);
    r.read("passes", c.mc_dropout.passes);
    r.finish();
  }

  if (const json* cal = top.child("calibration")) {
    ObjectReader r(*cal, "config.calibration");
    r.read("alpha", c.calibration.alpha);
    r.read("epsilon", c.calibration.epsilon);
    r.finish();
  }

  if (const json* mt = top.child("metrics")) {
    ObjectReader r(*mt, "config.metrics");
    r.read("cwc_etas", c.metrics.cwc_etas);
    r.read("cwc_eta", c.metrics.cwc_eta);
    r.read("ssc_bins", c.metrics.ssc_bins);
    r.read("sparsification_grid", c.metrics.sparsification_grid);
    r.read("group_min_n", c.metrics.group_min_count);
    r.read("group_top_k", c.metrics.group_top_k);
    r.finish();
  }
  top.finish();

  require(c.data.source == "generator" || c.data.source == "csv",
          "data.source is generator or csv");
  require(c.data.generator == "heteroscedastic" ||
              c.data.generator == "clustered_shift",
          "data.generator is heteroscedastic or clustered_shift");
  require(c.data.source != "csv" || !c.data.csv_path.empty(),
          "data.csv_path is required for csv sources");
  require(c.data.n >= 1 && c.data.d >= 1, "data.n and data.d must be >= 1");
  const SplitFractions& f = c.split.fractions;
  require(f.train > 0 && f.validation > 0 && f.calibration > 0 && f.test > 0,
          "every split fraction must be positive");
  require(std::abs(f.train + f.validation + f.calibration + f.test - 1.0) <=
              1e-9,
          "split fractions must sum to 1");
  require(c.model.num_experts >= 1, "model.experts must be >= 1");
  require(c.model.expert_hidden >= 1, "model.expert_hidden must be >= 1");
  require(c.model.variance_floor > 0, "model.variance_floor must be > 0");
  require(c.training.epochs >= 1 && c.training.batch_size >= 1 &&
              c.training.learning_rate > 0,
          "training needs epochs, batch_size >= 1 and learning_rate > 0");
  require(c.mc_dropout.rate >= 0 && c.mc_dropout.rate < 1,
          "mc_dropout.rate must lie in [0, 1)");
  require(c.mc_dropout.passes >= 2, "mc_dropout.passes must be >= 2");
  require(c.mc_dropout.epochs >= 1 && c.mc_dropout.batch_size >= 1,
          "mc_dropout needs epochs and batch_size >= 1");
  require(c.calibration.alpha > 0 && c.calibration.alpha < 1,
          "calibration.alpha must lie in (0, 1)");
  require(c.calibration.epsilon >= 0, "calibration.epsilon must be >= 0");
  require(c.metrics.cwc_eta > 0, "metrics.cwc_eta must be > 0");
  for (double eta : c.metrics.cwc_etas) {
    require(eta > 0, "metrics.cwc_etas must be positive");
  }
  for (int bins : c.metrics.ssc_bins) {
    require(bins >= 2, "metrics.ssc_bins entries must be >= 2");
  }
  return c;
}

json config_to_json(const ExperimentConfig& c) {
  std::vector<std::string> methods;
  for (Method m : c.methods) methods.push_back(method_name(m));
  const NoiseProfile& nz = c.data.noise;
  const ClusterShiftConfig& k = c.data.clusters;
  return json{
      {"schema_version", ExperimentConfig::kSchemaVersion},
      {"seed", c.seed},
      {"output_dir", c.output_dir},
      {"methods", methods},
      {"data",
       {{"source", c.data.source},
        {"generator", c.data.generator},
        {"n", c.data.n},
        {"d", c.data.d},
        {"csv_path", c.data.csv_path},
        {"noise",
         {{"profile", noise_profile_name(nz.kind)},
          {"level", nz.level},
          {"base", nz.base},
          {"slope", nz.slope},
          {"low", nz.low},
          {"high", nz.high},
          {"threshold", nz.threshold}}},
        {"clusters",
         {{"count", k.clusters},
          {"held_out", k.held_out},
          {"center_scale", k.center_scale},
          {"held_out_radius", k.held_out_radius},
          {"spread", k.cluster_spread},
          {"noise", k.noise},
          {"mode", shift_mode_name(k.mode)}}}}},
      {"split",
       {{"mode", split_mode_name(c.split.mode)},
        {"fractions",
         {{"train", c.split.fractions.train},
          {"val", c.split.fractions.validation},
          {"cal", c.split.fractions.calibration},
          {"test", c.split.fractions.test}}}}},
      {"model",
       {{"experts", c.model.num_experts},
        {"expert_hidden", c.model.expert_hidden},
        {"expert_activation", activation_name(c.model.expert_activation)},
        {"gate", gate_kind_name(c.model.gate)},
        {"gate_hidden", c.model.gate_hidden},
        {"variance_floor", c.model.variance_floor}}},
      {"training",
       {{"epochs", c.training.epochs},
        {"batch_size", c.training.batch_size},
        {"learning_rate", c.training.learning_rate}}},
      {"mc_dropout",
       {{"hidden", c.mc_dropout.hidden},
        {"activation", activation_name(c.mc_dropout.activation)},
        {"rate", c.mc_dropout.rate},
        {"learning_rate", c.mc_dropout.learning_rate},
        {"epochs", c.mc_dropout.epochs},
        {"batch_size", c.mc_dropout.batch_size},
        {"passes", c.mc_dropout.passes}}},
      {"calibration",
       {{"alpha", c.calibration.alpha}, {"epsilon", c.calibration.epsilon}}},
      {"metrics",
       {{"cwc_etas", c.metrics.cwc_etas},
        {"cwc_eta", c.metrics.cwc_eta},
        {"ssc_bins", c.metrics.ssc_bins},
        {"sparsification_grid", c.metrics.sparsification_grid},
        {"group_min_n", c.metrics.group_min_count},
        {"group_top_k", c.metrics.group_top_k}}},
  };
}

ExperimentConfig load_config(const std::string& path) {
  return config_from_json(read_json_file(path));
}

std::string config_hash(const ExperimentConfig& config) {
  json j = config_to_json(config);
  j.erase("output_dir");
  char buffer[17];
  std::snprintf(buffer, sizeof(buffer), "%016llx",
                static_cast<unsigned long long>(fnv1a64(j.dump())));
  return buffer;
}

MethodEvaluation evaluate_intervals(const std::string& method,
                                    std::span<const PredictionInterval> intervals,
                                    std::span<const double> labels,
                                    std::span<const double> uncertainty,
                                    double nll,
                                    std::span<const std::string> groups,
                                    double alpha, const MetricSpec& spec) {
  MethodEvaluation ev;
  MetricsReport& r = ev.report;
  r.method = method;
  r.n_test = labels.size();
  r.alpha = alpha;
  r.picp = picp(intervals, labels);
  const WidthSummary widths = mpiw_nmpiw(intervals, labels);
  r.mpiw = widths.mpiw;
  r.nmpiw = widths.nmpiw;
  const double nominal = 1.0 - alpha;
  r.cwc_eta = spec.cwc_eta;
  r.cwc = cwc(r.picp, r.nmpiw, {spec.cwc_eta, nominal});
  for (double eta : spec.cwc_etas) {
    r.cwc_by_eta[eta] = cwc(r.picp, r.nmpiw, {eta, nominal});
  }

  std::vector<double> centers(intervals.size());
  std::vector<double> errors(intervals.size());
  for (std::size_t i = 0; i < intervals.size(); ++i) {
    centers[i] = intervals[i].center;
    errors[i] = labels[i] - intervals[i].center;
  }
  ev.sparsification =
      sparsification(uncertainty, errors, spec.sparsification_grid);
  r.ause = ev.sparsification.ause;

  for (int bins : spec.ssc_bins) {
    try {
      ev.ssc[bins] = ssc(intervals, labels, bins);
      std::vector<double> coverage;
      for (const SscBin& b : ev.ssc[bins]) coverage.push_back(b.coverage);
      r.ssc[bins] = coverage;
    } catch (const MetricError& e) {
      ev.ssc.erase(bins);
      if (r.ssc_note.empty()) r.ssc_note = e.what();
    }
  }

  const PointMetrics pm = point_metrics(centers, labels);
  r.rmse = pm.rmse;
  r.mae = pm.mae;
  r.pearson = pm.pearson;
  r.spearman = pm.spearman;
  r.nll = nll;

  if (!groups.empty()) {
    ev.groups = groupwise_picp(intervals, labels, groups, spec.group_min_count,
                               spec.group_top_k);
  }
  return ev;
}

void stage_gen_data(const ExperimentConfig& c) {
  Rng root = root_rng(c);
  const std::uint64_t data_seed = root.child("data").seed();
  const std::uint64_t split_seed = root.child("split").seed();
  std::vector<std::string> warnings;
  Dataset ds;
  json meta{{"seed", c.seed}, {"data_seed", data_seed},
            {"split_seed", split_seed}};
  if (c.data.source == "csv") {
    ds = load_csv(c.data.csv_path);
    meta["generator"] = "csv";
    meta["csv_path"] = c.data.csv_path;
    if (!ds.has_splits()) {
      ds = split_dataset(std::move(ds), c.split.fractions, c.split.mode,
                         split_seed, &warnings);
    }
  } else if (c.data.generator == "heteroscedastic") {
    ds = gen_heteroscedastic(c.data.n, c.data.d, c.data.noise, data_seed);
    ds = split_dataset(std::move(ds), c.split.fractions, c.split.mode,
                       split_seed, &warnings);
    meta["generator"] = "heteroscedastic";
  } else {
    ClusterShiftConfig k = c.data.clusters;
    k.n = c.data.n;
    k.d = c.data.d;
    k.fractions = c.split.fractions;
    ds = gen_clustered_shift(k, data_seed);
    meta["generator"] = "clustered_shift";
  }
  json data_config = config_to_json(c)["data"];
  meta["config"] = data_config;
  meta["rows"] = ds.size();
  meta["dim"] = ds.dim();
  meta["warnings"] = warnings;
  for (Split s : {Split::kTrain, Split::kValidation, Split::kCalibration,
                  Split::kTest}) {
    const std::size_t count = ds.rows(s).size();
    if (count == 0) {
      throw Error("split '" + split_name(s) + "' is empty");
    }
    meta["split_sizes"][split_name(s)] = count;
  }
  save_csv(ds, path_in(c, "data.csv"));
  write_json_file(path_in(c, "data.meta.json"), meta);
  update_manifest(c, "gen-data", {"data.csv", "data.meta.json"});
}

void stage_train(const ExperimentConfig& c) {
  const Dataset ds = load_stage_data(c);
  Rng root = root_rng(c);
  MoeConfig mc = c.model;
  mc.input_dim = ds.dim();
  Rng init = root.child("moe-init");
  TrainConfig tc = c.training;
  tc.seed = root.child("moe-train").seed();
  const TrainResult trained =
      train_moe(MoeModel::initialize(mc, init), ds.features_of(Split::kTrain),
                ds.targets_of(Split::kTrain),
                ds.features_of(Split::kValidation),
                ds.targets_of(Split::kValidation), tc);
  save_checkpoint(trained.model, path_in(c, "model.json"));
  std::vector<std::vector<std::string>> rows;
  for (std::size_t e = 0; e < trained.train_nll.size(); ++e) {
    rows.push_back({std::to_string(e), format_double(trained.train_nll[e]),
                    format_double(trained.validation_nll[e])});
  }
  write_text_file(path_in(c, "loss_history.csv"),
                  rows_to_csv("epoch,train_nll,validation_nll", rows));
  std::vector<std::string> artifacts = {"model.json", "loss_history.csv"};

  if (has_method(c, Method::kMcDropout)) {
    Rng mc_init = root.child("mc-init");
    const McTrainResult mc_trained = train_mc_dropout(
        make_dropout_mlp(ds.dim(), c.mc_dropout, mc_init),
        ds.features_of(Split::kTrain), ds.targets_of(Split::kTrain),
        c.mc_dropout, root.child("mc-train").seed());
    write_json_file(path_in(c, "mc_dropout.json"), json(mc_trained.model));
    std::vector<std::vector<std::string>> mc_rows;
    for (std::size_t e = 0; e < mc_trained.train_mse.size(); ++e) {
      mc_rows.push_back(
          {std::to_string(e + 1), format_double(mc_trained.train_mse[e])});
    }
    write_text_file(path_in(c, "mc_dropout_history.csv"),
                    rows_to_csv("epoch,train_mse", mc_rows));
    artifacts.push_back("mc_dropout.json");
    artifacts.push_back("mc_dropout_history.csv");
  }
  update_manifest(c, "train", artifacts);
}

namespace {

CalibrationResult calibrate_from_data(const ExperimentConfig& c,
                                      const Dataset& ds, const MoeModel& model,
                                      ScaleKind kind) {
  const std::vector<MixturePrediction> preds =
      moe_forward_batch(model, ds.features_of(Split::kCalibration));
  std::vector<double> centers;
  for (const MixturePrediction& p : preds) centers.push_back(p.mean());
  const std::vector<double> targets = to_std(ds.targets_of(Split::kCalibration));
  return calibrate(targets, centers, scale_values(kind, preds), kind,
                   c.calibration.alpha, c.calibration.epsilon);
}

}  // namespace

void stage_calibrate(const ExperimentConfig& c) {
  const Dataset ds = load_stage_data(c);
  const MoeModel model = load_stage_model(c);
  std::vector<std::string> artifacts;
  for (ScaleKind kind : needed_scales(c)) {
    write_json_file(path_in(c, calibration_file(kind)),
                    json(calibrate_from_data(c, ds, model, kind)));
    artifacts.push_back(calibration_file(kind));
  }
  update_manifest(c, "calibrate", artifacts);
}

void stage_evaluate(const ExperimentConfig& c) {
  const Dataset ds = load_stage_data(c);
  const MoeModel model = load_stage_model(c);
  const Matrix test_x = ds.features_of(Split::kTest);
  const std::vector<double> labels = to_std(ds.targets_of(Split::kTest));
  const std::vector<std::string> groups = ds.groups_of(Split::kTest);
  const std::vector<MixturePrediction> preds = moe_forward_batch(model, test_x);
  std::vector<double> centers;
  for (const MixturePrediction& p : preds) centers.push_back(p.mean());
  const double moe_nll = report_nll(preds, labels);
  const double alpha = c.calibration.alpha;
  const double z = normal_quantile(1.0 - alpha / 2.0);

  auto load_calibration = [&](ScaleKind kind) {
    require_artifact(c, calibration_file(kind), "calibrate");
    CalibrationResult stored =
        read_json_file(path_in(c, calibration_file(kind)))
            .get<CalibrationResult>();
    if (stored.alpha != alpha || stored.epsilon != c.calibration.epsilon) {
      // Overridden alpha/epsilon: recalibrate on the same calibration split.
      stored = calibrate_from_data(c, ds, model, kind);
    }
    return stored;
  };

  std::vector<std::string> artifacts;
  std::vector<std::vector<std::string>> group_rows;
  for (Method m : c.methods) {
    const std::string name = method_name(m);
    std::vector<PredictionInterval> intervals;
    std::vector<double> uncertainty;
    std::optional<CalibrationResult> calibration;
    double nll = moe_nll;
    switch (m) {
      case Method::kTesseraE:
      case Method::kTesseraA:
      case Method::kClassicalCp: {
        const ScaleKind kind = m == Method::kTesseraE   ? ScaleKind::kEpistemic
                               : m == Method::kTesseraA ? ScaleKind::kAleatoric
                                                        : ScaleKind::kConstant;
        calibration = load_calibration(kind);
        uncertainty = scale_values(kind, preds);
        intervals = build_intervals(*calibration, centers, uncertainty);
        break;
      }
      case Method::kMoeE:
      case Method::kMoeA: {
        uncertainty = scale_values(m == Method::kMoeE ? ScaleKind::kEpistemic
                                                      : ScaleKind::kAleatoric,
                                   preds);
        intervals = fixed_multiplier_intervals(centers, uncertainty, z);
        break;
      }
      case Method::kMcDropout: {
        require_artifact(c, "mc_dropout.json", "train");
        const DropoutMlp mc =
            read_json_file(path_in(c, "mc_dropout.json")).get<DropoutMlp>();
        Rng passes_rng = root_rng(c).child("mc-passes");
        const std::vector<McPrediction> mc_preds =
            mc_predict_batch(mc, test_x, c.mc_dropout.passes, passes_rng);
        std::vector<double> means, variances;
        for (const McPrediction& p : mc_preds) {
          intervals.push_back(mc_interval(p.mean, p.variance, alpha));
          uncertainty.push_back(std::sqrt(p.variance));
          means.push_back(p.mean);
          variances.push_back(p.variance);
        }
        nll = gaussian_nll(means, variances, labels);
        break;
      }
    }

    MethodEvaluation ev = evaluate_intervals(
        name, intervals, labels, uncertainty, nll, groups, alpha, c.metrics);
    ev.report.calibration = calibration;
    write_json_file(path_in(c, "metrics_" + name + ".json"), json(ev.report));
    artifacts.push_back("metrics_" + name + ".json");

    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 0; i < ev.sparsification.fractions.size(); ++i) {
      rows.push_back({format_double(ev.sparsification.fractions[i]),
                      format_double(ev.sparsification.model_rmse[i]),
                      format_double(ev.sparsification.oracle_rmse[i])});
    }
    const std::string sp = "curves/" + name + "_sparsification.csv";
    write_text_file(path_in(c, sp),
                    rows_to_csv("fraction,model_rmse,oracle_rmse", rows));
    artifacts.push_back(sp);

    for (const auto& [bins, table] : ev.ssc) {
      std::vector<std::vector<std::string>> ssc_rows;
      for (std::size_t b = 0; b < table.size(); ++b) {
        ssc_rows.push_back({std::to_string(b), std::to_string(table[b].count),
                            format_double(table[b].min_width),
                            format_double(table[b].max_width),
                            format_double(table[b].coverage)});
      }
      const std::string file =
          "curves/" + name + "_ssc_J" + std::to_string(bins) + ".csv";
      write_text_file(path_in(c, file),
                      rows_to_csv("bin,count,min_width,max_width,coverage",
                                  ssc_rows));
      artifacts.push_back(file);
    }

    if (ev.groups) {
      auto add = [&](const char* table,
                     const std::vector<GroupCoverage>& entries) {
        for (const GroupCoverage& g : entries) {
          group_rows.push_back({name, table, g.group, std::to_string(g.count),
                                format_double(g.picp)});
        }
      };
      add("all", ev.groups->all);
      add("most_frequent", ev.groups->most_frequent);
      add("least_frequent", ev.groups->least_frequent);
    }
  }
  write_text_file(path_in(c, "curves/group_coverage.csv"),
                  rows_to_csv("method,table,group,n,picp", group_rows));
  artifacts.push_back("curves/group_coverage.csv");

  std::vector<double> aleatoric, epistemic;
  for (const MixturePrediction& p : preds) {
    aleatoric.push_back(p.aleatoric());
    epistemic.push_back(p.epistemic());
  }
  const DisentangleStats ds_stats = disentangle_stats(aleatoric, epistemic);
  write_json_file(path_in(c, "disentanglement.json"),
                  json{{"n", aleatoric.size()},
                       {"pearson", json_real(ds_stats.pearson)},
                       {"spearman", json_real(ds_stats.spearman)},
                       {"kendall", json_real(ds_stats.kendall)},
                       {"welch_p", json_real(ds_stats.welch_p)},
                       {"mann_whitney_p", json_real(ds_stats.mann_whitney_p)}});
  artifacts.push_back("disentanglement.json");
  update_manifest(c, "evaluate", artifacts);
}

int run_experiment(const ExperimentConfig& config) {
  using StageFn = void (*)(const ExperimentConfig&);
  const std::pair<const char*, StageFn> stages[] = {
      {"gen-data", stage_gen_data},
      {"train", stage_train},
      {"calibrate", stage_calibrate},
      {"evaluate", stage_evaluate},
  };
  for (const auto& [name, fn] : stages) {
    try {
      fn(config);
    } catch (const std::exception& e) {
      try {
        update_manifest(config, name, {}, e.what());
      } catch (const std::exception&) {
        // The manifest itself could not be written; the error still
        // propagates through the return code.
      }
      return 1;
    }
  }
  return 0;
}

std::string report_runs(const std::vector<std::string>& run_dirs,
                        const std::string& out_dir) {
  if (run_dirs.empty()) throw ConfigError("report needs at least one run");
  static const char* kMetrics[] = {"picp", "mpiw",     "nmpiw",    "cwc",
                                   "ause", "rmse",     "mae",      "pearson",
                                   "spearman", "nll"};
  // method -> metric -> values across runs
  std::map<std::string, std::map<std::string, std::vector<double>>> values;
  std::vector<std::string> methods_seen;
  for (const std::string& dir : run_dirs) {
    bool any = false;
    for (Method m : all_methods()) {
      const std::string name = method_name(m);
      const fs::path file = fs::path(dir) / ("metrics_" + name + ".json");
      if (!fs::exists(file)) continue;
      any = true;
      if (std::find(methods_seen.begin(), methods_seen.end(), name) ==
          methods_seen.end()) {
        methods_seen.push_back(name);
      }
      const json j = read_json_file(file.string());
      for (const char* metric : kMetrics) {
        values[name][metric].push_back(real_from_json(j.at(metric)));
      }
    }
    if (!any) {
      throw Error("run directory '" + dir + "' has no metrics_<method>.json");
    }
  }

  json report{{"runs", run_dirs}, {"methods", json::object()}};
  std::vector<std::vector<std::string>> rows;
  std::ostringstream table;
  table << "method";
  for (const char* metric : kMetrics) table << '\t' << metric;
  table << '\n';
  for (Method m : all_methods()) {
    const std::string name = method_name(m);
    if (!values.count(name)) continue;
    table << name;
    for (const char* metric : kMetrics) {
      const std::vector<double>& v = values[name][metric];
      double sum = 0.0;
      for (double x : v) sum += x;
      const double mean = sum / static_cast<double>(v.size());
      double ss = 0.0;
      for (double x : v) ss += (x - mean) * (x - mean);
      double sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1))
                               : 0.0;
      if (!std::isfinite(mean)) sd = std::numeric_limits<double>::quiet_NaN();
      report["methods"][name][metric] = {{"mean", json_real(mean)},
                                         {"std", json_real(sd)},
                                         {"n", v.size()}};
      rows.push_back({name, metric, format_double(mean), format_double(sd),
                      std::to_string(v.size())});
      char cell[64];
      std::snprintf(cell, sizeof(cell), "\t%.4g ± %.2g", mean, sd);
      table << cell;
    }
    table << '\n';
  }
  write_json_file((fs::path(out_dir) / "report.json").string(), report);
  write_text_file((fs::path(out_dir) / "report.csv").string(),
                  rows_to_csv("method,metric,mean,std,n", rows));
  return table.str();
}

}  // namespace tessera
