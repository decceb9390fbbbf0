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

// Prediction-interval evaluation: validity (PICP, per-group PICP),
// efficiency (MPIW, NMPIW, CWC), adaptivity (sparsification / AUSE and
// size-stratified coverage), point accuracy and probabilistic fit.

#ifndef TESSERA_METRICS_H_
#define TESSERA_METRICS_H_

#include <cstddef>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tessera/conformal.h"
#include "tessera/moe.h"

namespace tessera {

// Fraction of labels inside their interval (endpoints included). Infinite
// intervals cover every label.
double picp(std::span<const PredictionInterval> intervals,
            std::span<const double> labels);

struct WidthSummary {
  double mpiw = 0.0;
  double nmpiw = 0.0;
  bool infinite = false;  // some interval was unbounded; both widths +inf
};

// Mean width and mean width over the label range max(y) - min(y). Throws
// MetricError when the label range is degenerate.
WidthSummary mpiw_nmpiw(std::span<const PredictionInterval> intervals,
                        std::span<const double> labels);

struct CwcConfig {
  double eta = 50.0;
  double nominal = 0.90;
};

// NMPIW * (1 + gamma * exp(-eta (PICP - nominal))), gamma = [PICP < nominal].
double cwc(double picp_value, double nmpiw_value, const CwcConfig& config);

struct SparsificationCurve {
  std::vector<double> fractions;
  std::vector<double> model_rmse;
  std::vector<double> oracle_rmse;
  double ause = 0.0;
};

// {0, 0.05, ..., 0.95}.
std::vector<double> default_sparsification_grid();

// At each fraction f the floor(f n) points with the largest uncertainty
// (model curve) or largest |error| (oracle curve) are dropped and the RMSE of
// the rest recorded; ties are broken by index. AUSE is the trapezoidal area
// of (model - oracle) over the grid. The grid must be ascending, start at 0
// and stay below 1.
SparsificationCurve sparsification(std::span<const double> uncertainty,
                                   std::span<const double> errors,
                                   std::span<const double> grid);

struct SscBin {
  std::size_t count = 0;
  double min_width = 0.0;
  double max_width = 0.0;
  double coverage = 0.0;
};

// Size-stratified coverage: sort by width (stable), split into `bins`
// equal-count bins with the remainder going to the last bins, and report
// coverage per bin. Refuses (MetricError) constant or unbounded widths.
std::vector<SscBin> ssc(std::span<const PredictionInterval> intervals,
                        std::span<const double> labels, int bins);
std::vector<SscBin> ssc_from_widths(std::span<const double> widths,
                                    const std::vector<bool>& covered,
                                    int bins);

inline constexpr const char* kConstantWidthSscError =
    "constant-width intervals making SSC uninformative";

struct GroupCoverage {
  std::string group;
  std::size_t count = 0;
  double picp = 0.0;
};

struct GroupCoverageTable {
  std::vector<GroupCoverage> all;  // by size descending, then name
  std::vector<GroupCoverage> most_frequent;
  std::vector<GroupCoverage> least_frequent;
  std::vector<std::string> warnings;
};

GroupCoverageTable groupwise_picp(std::span<const PredictionInterval> intervals,
                                  std::span<const double> labels,
                                  std::span<const std::string> groups,
                                  std::size_t min_count = 10,
                                  std::size_t top_k = 15);

struct PointMetrics {
  double rmse = 0.0;
  double mae = 0.0;
  double pearson = 0.0;   // NaN when undefined
  double spearman = 0.0;  // NaN when undefined
};

PointMetrics point_metrics(std::span<const double> predictions,
                           std::span<const double> labels);

// Mean of -log mixture_pdf(pred_i, y_i).
double report_nll(std::span<const MixturePrediction> preds,
                  std::span<const double> labels);

// Mean Gaussian NLL; variances are floored at `variance_floor`.
double gaussian_nll(std::span<const double> means,
                    std::span<const double> variances,
                    std::span<const double> labels,
                    double variance_floor = 1e-6);

struct MetricsReport {
  std::string method;
  std::size_t n_test = 0;
  double alpha = 0.10;
  double picp = 0.0;
  double mpiw = 0.0;
  double nmpiw = 0.0;
  double cwc_eta = 50.0;        // eta of the headline `cwc` value
  double cwc = 0.0;
  std::map<double, double> cwc_by_eta;
  double ause = 0.0;
  std::map<int, std::vector<double>> ssc;  // J -> per-bin coverage
  std::string ssc_note;                    // set when SSC was refused
  double rmse = 0.0;
  double mae = 0.0;
  double pearson = 0.0;
  double spearman = 0.0;
  double nll = 0.0;
  std::optional<CalibrationResult> calibration;
};

void to_json(nlohmann::json& j, const MetricsReport& r);

}  // namespace tessera

#endif  // TESSERA_METRICS_H_
