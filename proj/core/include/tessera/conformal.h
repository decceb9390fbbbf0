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

// Normalized split-conformal calibration.
//
// Given calibration residuals scaled by a per-sample difficulty S(x), the
// score |y - center| / (S + eps) is computed for every calibration point and
// its finite-sample-adjusted (1 - alpha) quantile q_hat sizes the intervals
// center(x) +/- q_hat * S(x) on new points. The constant kind (S = 1) is
// ordinary split conformal prediction.

#ifndef TESSERA_CONFORMAL_H_
#define TESSERA_CONFORMAL_H_

#include <cstddef>
#include <nlohmann/json.hpp>
#include <span>
#include <string>
#include <vector>

#include "tessera/moe.h"

namespace tessera {

enum class ScaleKind { kEpistemic, kAleatoric, kConstant };

std::string scale_kind_name(ScaleKind kind);
ScaleKind scale_kind_from_name(const std::string& name);

// S(x) for each prediction: E(x), A(x), or 1.
std::vector<double> scale_values(ScaleKind kind,
                                 std::span<const MixturePrediction> preds);

inline constexpr double kDefaultScoreEpsilon = 1e-8;

struct CalibrationResult {
  ScaleKind kind = ScaleKind::kConstant;
  double alpha = 0.10;
  double epsilon = kDefaultScoreEpsilon;
  std::size_t n_cal = 0;
  double q_hat = 0.0;  // may be +inf

  bool infinite() const;
};

// Symmetric interval center +/- half_width. The width is taken from the
// half-width rather than from upper - lower so that equal half-widths give
// bit-identical widths.
struct PredictionInterval {
  double center = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double scale = 0.0;
  double half_width = 0.0;

  static PredictionInterval around(double center, double half_width,
                                   double scale);

  double width() const { return 2.0 * half_width; }
  bool infinite() const;
  // Endpoints count as covered.
  bool covers(double y) const { return lower <= y && y <= upper; }
};

// |y_i - center_i| / (scale_i + epsilon). Throws CalibrationError when a
// denominator is zero or a scale is negative.
std::vector<double> nonconformity_scores(std::span<const double> targets,
                                         std::span<const double> centers,
                                         std::span<const double> scales,
                                         double epsilon);

// Order-statistic index k = ceil((1 - alpha)(n + 1)), 1-based. A value above
// n means the quantile is +inf.
std::size_t conformal_rank(std::size_t n, double alpha);

// k-th smallest score with k = conformal_rank(n, alpha), or +inf if k > n.
double conformal_quantile(std::span<const double> scores, double alpha);

// Scores plus quantile. For ScaleKind::kConstant `scales` is ignored and
// S = 1 is used.
CalibrationResult calibrate(std::span<const double> targets,
                            std::span<const double> centers,
                            std::span<const double> scales, ScaleKind kind,
                            double alpha,
                            double epsilon = kDefaultScoreEpsilon);

// center +/- q_hat * scale per point; for ScaleKind::kConstant every scale
// is 1. When q_hat is +inf every interval is (-inf, +inf).
std::vector<PredictionInterval> build_intervals(
    const CalibrationResult& calib, std::span<const double> centers,
    std::span<const double> scales);

// center +/- multiplier * scale; used for the uncalibrated comparisons.
std::vector<PredictionInterval> fixed_multiplier_intervals(
    std::span<const double> centers, std::span<const double> scales,
    double multiplier);

void to_json(nlohmann::json& j, const CalibrationResult& c);
void from_json(const nlohmann::json& j, CalibrationResult& c);

}  // namespace tessera

#endif  // TESSERA_CONFORMAL_H_
