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

#include "tessera/metrics.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "tessera/error.h"
#include "tessera/io.h"
#include "tessera/stats.h"

namespace tessera {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_lengths(std::size_t a, std::size_t b) {
  if (a != b) throw DimensionError("intervals and labels differ in length");
  if (a == 0) throw MetricError("metric of an empty test set");
}

// Indices sorted by key descending; equal keys keep index order.
std::vector<std::size_t> descending_order(std::span<const double> key) {
  std::vector<std::size_t> order(key.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return key[a] > key[b]; });
  return order;
}

// RMSE of the points left after removing the first floor(f n) of `order`.
std::vector<double> remaining_rmse(std::span<const std::size_t> order,
                                   std::span<const double> errors,
                                   std::span<const double> grid) {
  const std::size_t n = order.size();
  // suffix[m] = sum of squared errors of order[m..n).
  std::vector<double> suffix(n + 1, 0.0);
  for (std::size_t m = n; m-- > 0;) {
    const double e = errors[order[m]];
    suffix[m] = suffix[m + 1] + e * e;
  }
  std::vector<double> out;
  out.reserve(grid.size());
  for (double f : grid) {
    const auto removed = static_cast<std::size_t>(
        std::floor(f * static_cast<double>(n) + 1e-9));
    out.push_back(
        std::sqrt(suffix[removed] / static_cast<double>(n - removed)));
  }
  return out;
}

}  // namespace

double picp(std::span<const PredictionInterval> intervals,
            std::span<const double> labels) {
  check_lengths(intervals.size(), labels.size());
  std::size_t covered = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (intervals[i].covers(labels[i])) ++covered;
  }
  return static_cast<double>(covered) / static_cast<double>(labels.size());
}

WidthSummary mpiw_nmpiw(std::span<const PredictionInterval> intervals,
                        std::span<const double> labels) {
  check_lengths(intervals.size(), labels.size());
  const auto [lo, hi] = std::minmax_element(labels.begin(), labels.end());
  const double range = *hi - *lo;
  if (!(range > 0.0)) {
    throw MetricError("NMPIW needs y_max > y_min on the test labels");
  }
  WidthSummary s;
  double total = 0.0;
  for (const PredictionInterval& iv : intervals) {
    if (iv.infinite()) {
      s.infinite = true;
      break;
    }
    total += iv.width();
  }
  if (s.infinite) {
    s.mpiw = kInf;
    s.nmpiw = kInf;
    return s;
  }
  s.mpiw = total / static_cast<double>(intervals.size());
  double normalized = 0.0;
  for (const PredictionInterval& iv : intervals) normalized += iv.width() / range;
  s.nmpiw = normalized / static_cast<double>(intervals.size());
  return s;
}

double cwc(double picp_value, double nmpiw_value, const CwcConfig& config) {
  if (picp_value >= config.nominal) return nmpiw_value;
  return nmpiw_value *
         (1.0 + std::exp(-config.eta * (picp_value - config.nominal)));
}

std::vector<double> default_sparsification_grid() {
  std::vector<double> grid;
  for (int i = 0; i < 20; ++i) grid.push_back(0.05 * i);
  return grid;
}

SparsificationCurve sparsification(std::span<const double> uncertainty,
                                   std::span<const double> errors,
                                   std::span<const double> grid) {
  if (uncertainty.size() != errors.size()) {
    throw DimensionError("uncertainty and errors differ in length");
  }
  if (errors.empty()) throw MetricError("sparsification of an empty set");
  if (grid.empty() || grid.front() != 0.0) {
    throw MetricError("sparsification grid must start at 0");
  }
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] < 1.0) || (i > 0 && !(grid[i] > grid[i - 1]))) {
      throw MetricError(
          "sparsification grid must be strictly ascending and below 1");
    }
  }
  std::vector<double> abs_errors(errors.size());
  for (std::size_t i = 0; i < errors.size(); ++i) {
    abs_errors[i] = std::abs(errors[i]);
  }
  SparsificationCurve curve;
  curve.fractions.assign(grid.begin(), grid.end());
  curve.model_rmse =
      remaining_rmse(descending_order(uncertainty), errors, grid);
  curve.oracle_rmse = remaining_rmse(descending_order(abs_errors), errors, grid);
  for (std::size_t i = 1; i < grid.size(); ++i) {
    const double left = curve.model_rmse[i - 1] - curve.oracle_rmse[i - 1];
    const double right = curve.model_rmse[i] - curve.oracle_rmse[i];
    curve.ause += 0.5 * (grid[i] - grid[i - 1]) * (left + right);
  }
  return curve;
}

std::vector<SscBin> ssc_from_widths(std::span<const double> widths,
                                    const std::vector<bool>& covered,
                                    int bins) {
  if (widths.size() != covered.size()) {
    throw DimensionError("widths and coverage flags differ in length");
  }
  if (bins < 2) throw MetricError("SSC needs at least 2 bins");
  const std::size_t n = widths.size();
  const auto j = static_cast<std::size_t>(bins);
  if (n < j) throw MetricError("SSC needs at least as many points as bins");
  for (double w : widths) {
    if (!std::isfinite(w)) {
      throw MetricError("SSC is undefined for unbounded intervals");
    }
  }
  const auto [lo, hi] = std::minmax_element(widths.begin(), widths.end());
  if (*lo == *hi) throw MetricError(kConstantWidthSscError);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return widths[a] < widths[b];
  });
  const std::size_t base = n / j;
  const std::size_t extra = n % j;
  std::vector<SscBin> out;
  std::size_t start = 0;
  for (std::size_t b = 0; b < j; ++b) {
    const std::size_t size = base + (b >= j - extra ? 1 : 0);
    SscBin bin;
    bin.count = size;
    bin.min_width = widths[order[start]];
    bin.max_width = widths[order[start + size - 1]];
    std::size_t hits = 0;
    for (std::size_t k = start; k < start + size; ++k) {
      if (covered[order[k]]) ++hits;
    }
    bin.coverage = static_cast<double>(hits) / static_cast<double>(size);
    out.push_back(bin);
    start += size;
  }
  return out;
}

std::vector<SscBin> ssc(std::span<const PredictionInterval> intervals,
                        std::span<const double> labels, int bins) {
  check_lengths(intervals.size(), labels.size());
  std::vector<double> widths(intervals.size());
  std::vector<bool> covered(intervals.size());
  for (std::size_t i = 0; i < intervals.size(); ++i) {
    widths[i] = intervals[i].width();
    covered[i] = intervals[i].covers(labels[i]);
  }
  return ssc_from_widths(widths, covered, bins);
}

GroupCoverageTable groupwise_picp(std::span<const PredictionInterval> intervals,
                                  std::span<const double> labels,
                                  std::span<const std::string> groups,
                                  std::size_t min_count, std::size_t top_k) {
  check_lengths(intervals.size(), labels.size());
  if (groups.size() != labels.size()) {
    throw DimensionError("group labels differ in length from the test set");
  }
  std::map<std::string, std::pair<std::size_t, std::size_t>> tally;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto& [count, hits] = tally[groups[i]];
    ++count;
    if (intervals[i].covers(labels[i])) ++hits;
  }
  GroupCoverageTable table;
  for (const auto& [name, counts] : tally) {
    table.all.push_back({name, counts.first,
                         static_cast<double>(counts.second) /
                             static_cast<double>(counts.first)});
  }
  std::stable_sort(table.all.begin(), table.all.end(),
                   [](const GroupCoverage& a, const GroupCoverage& b) {
                     return a.count > b.count;
                   });
  std::vector<GroupCoverage> eligible;
  for (const GroupCoverage& g : table.all) {
    if (g.count >= min_count) eligible.push_back(g);
  }
  if (eligible.empty()) {
    table.warnings.push_back("no group has at least " +
                             std::to_string(min_count) + " test points");
    return table;
  }
  const std::size_t k = std::min(top_k, eligible.size());
  table.most_frequent.assign(eligible.begin(),
                             eligible.begin() + static_cast<std::ptrdiff_t>(k));
  std::stable_sort(eligible.begin(), eligible.end(),
                   [](const GroupCoverage& a, const GroupCoverage& b) {
                     return a.count < b.count;
                   });
  table.least_frequent.assign(
      eligible.begin(), eligible.begin() + static_cast<std::ptrdiff_t>(k));
  return table;
}

PointMetrics point_metrics(std::span<const double> predictions,
                           std::span<const double> labels) {
  if (predictions.size() != labels.size()) {
    throw DimensionError("predictions and labels differ in length");
  }
  if (labels.size() < 2) throw MetricError("point metrics need n >= 2");
  PointMetrics m;
  double sq = 0.0, abs_sum = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double e = predictions[i] - labels[i];
    sq += e * e;
    abs_sum += std::abs(e);
  }
  const auto n = static_cast<double>(labels.size());
  m.rmse = std::sqrt(sq / n);
  m.mae = abs_sum / n;
  m.pearson = pearson(predictions, labels);
  m.spearman = spearman(predictions, labels);
  return m;
}

double report_nll(std::span<const MixturePrediction> preds,
                  std::span<const double> labels) {
  if (preds.size() != labels.size()) {
    throw DimensionError("predictions and labels differ in length");
  }
  if (preds.empty()) throw MetricError("NLL of an empty set");
  double total = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    total -= log_mixture_pdf(preds[i], labels[i]);
  }
  return total / static_cast<double>(preds.size());
}

double gaussian_nll(std::span<const double> means,
                    std::span<const double> variances,
                    std::span<const double> labels, double variance_floor) {
  if (means.size() != labels.size() || variances.size() != labels.size()) {
    throw DimensionError("Gaussian NLL inputs differ in length");
  }
  if (labels.empty()) throw MetricError("NLL of an empty set");
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double var = std::max(variances[i], variance_floor);
    const double diff = labels[i] - means[i];
    total += 0.5 * std::log(2.0 * std::numbers::pi * var) +
             diff * diff / (2.0 * var);
  }
  return total / static_cast<double>(labels.size());
}

void to_json(nlohmann::json& j, const MetricsReport& r) {
  nlohmann::json cwc_table = nlohmann::json::object();
  for (const auto& [eta, value] : r.cwc_by_eta) {
    cwc_table[format_double(eta)] = json_real(value);
  }
  nlohmann::json ssc_table = nlohmann::json::object();
  for (const auto& [bins, coverage] : r.ssc) {
    ssc_table[std::to_string(bins)] = coverage;
  }
  j = nlohmann::json{
      {"method", r.method},
      {"n_test", r.n_test},
      {"alpha", r.alpha},
      {"picp", json_real(r.picp)},
      {"mpiw", json_real(r.mpiw)},
      {"nmpiw", json_real(r.nmpiw)},
      {"cwc", json_real(r.cwc)},
      {"cwc_eta", r.cwc_eta},
      {"cwc_by_eta", cwc_table},
      {"ause", json_real(r.ause)},
      {"ssc", ssc_table},
      {"rmse", json_real(r.rmse)},
      {"mae", json_real(r.mae)},
      {"pearson", json_real(r.pearson)},
      {"spearman", json_real(r.spearman)},
      {"nll", json_real(r.nll)},
  };
  if (!r.ssc_note.empty()) j["ssc_note"] = r.ssc_note;
  if (r.calibration) j["calibration"] = *r.calibration;
}

}  // namespace tessera
