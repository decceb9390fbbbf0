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

#include "tessera/conformal.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tessera/error.h"
#include "tessera/io.h"

namespace tessera {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw CalibrationError("alpha must lie in (0, 1)");
  }
}

}  // namespace

std::string scale_kind_name(ScaleKind kind) {
  switch (kind) {
    case ScaleKind::kEpistemic:
      return "epistemic";
    case ScaleKind::kAleatoric:
      return "aleatoric";
    case ScaleKind::kConstant:
      return "constant";
  }
  return "constant";
}

ScaleKind scale_kind_from_name(const std::string& name) {
  if (name == "epistemic") return ScaleKind::kEpistemic;
  if (name == "aleatoric") return ScaleKind::kAleatoric;
  if (name == "constant") return ScaleKind::kConstant;
  throw ConfigError("unknown scale kind '" + name + "'");
}

std::vector<double> scale_values(ScaleKind kind,
                                 std::span<const MixturePrediction> preds) {
  std::vector<double> out;
  out.reserve(preds.size());
  for (const MixturePrediction& p : preds) {
    switch (kind) {
      case ScaleKind::kEpistemic:
        out.push_back(p.epistemic());
        break;
      case ScaleKind::kAleatoric:
        out.push_back(p.aleatoric());
        break;
      case ScaleKind::kConstant:
        out.push_back(1.0);
        break;
    }
  }
  return out;
}

bool CalibrationResult::infinite() const { return std::isinf(q_hat); }

PredictionInterval PredictionInterval::around(double center, double half_width,
                                             double scale) {
  if (std::isinf(half_width)) {
    return {center, -kInf, kInf, scale, kInf};
  }
  return {center, center - half_width, center + half_width, scale, half_width};
}

bool PredictionInterval::infinite() const {
  return std::isinf(lower) || std::isinf(upper);
}

std::vector<double> nonconformity_scores(std::span<const double> targets,
                                         std::span<const double> centers,
                                         std::span<const double> scales,
                                         double epsilon) {
  if (targets.size() != centers.size() || targets.size() != scales.size()) {
    throw DimensionError("score inputs have different lengths");
  }
  if (!(epsilon >= 0.0)) throw CalibrationError("epsilon must be >= 0");
  std::vector<double> scores(targets.size());
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (!(scales[i] >= 0.0)) {
      throw CalibrationError("negative or NaN scale at calibration point " +
                             std::to_string(i));
    }
    const double denom = scales[i] + epsilon;
    if (denom == 0.0) {
      throw CalibrationError("zero score denominator at calibration point " +
                             std::to_string(i) + "; use epsilon > 0");
    }
    scores[i] = std::abs(targets[i] - centers[i]) / denom;
  }
  return scores;
}

std::size_t conformal_rank(std::size_t n, double alpha) {
  check_alpha(alpha);
  // The 1e-9 slack keeps exact products such as 0.9 * 10 from rounding up
  // to the next integer through representation error.
  const double level = (1.0 - alpha) * static_cast<double>(n + 1);
  return static_cast<std::size_t>(std::ceil(level - 1e-9));
}

double conformal_quantile(std::span<const double> scores, double alpha) {
  if (scores.empty()) throw CalibrationError("no calibration scores");
  const std::size_t k = conformal_rank(scores.size(), alpha);
  if (k > scores.size()) return kInf;
  std::vector<double> sorted(scores.begin(), scores.end());
  const auto kth = sorted.begin() + static_cast<std::ptrdiff_t>(k == 0 ? 0 : k - 1);
  std::nth_element(sorted.begin(), kth, sorted.end());
  return *kth;
}

CalibrationResult calibrate(std::span<const double> targets,
                            std::span<const double> centers,
                            std::span<const double> scales, ScaleKind kind,
                            double alpha, double epsilon) {
  check_alpha(alpha);
  std::vector<double> ones;
  if (kind == ScaleKind::kConstant) {
    ones.assign(targets.size(), 1.0);
    scales = ones;
  }
  const std::vector<double> scores =
      nonconformity_scores(targets, centers, scales, epsilon);
  CalibrationResult result;
  result.kind = kind;
  result.alpha = alpha;
  result.epsilon = epsilon;
  result.n_cal = scores.size();
  result.q_hat = conformal_quantile(scores, alpha);
  return result;
}

std::vector<PredictionInterval> build_intervals(
    const CalibrationResult& calib, std::span<const double> centers,
    std::span<const double> scales) {
  const bool constant = calib.kind == ScaleKind::kConstant;
  if (!constant && scales.size() != centers.size()) {
    throw DimensionError("centers and scales have different lengths");
  }
  std::vector<PredictionInterval> out(centers.size());
  for (std::size_t i = 0; i < centers.size(); ++i) {
    const double scale = constant ? 1.0 : scales[i];
    const double half = calib.infinite() ? kInf : calib.q_hat * scale;
    out[i] = PredictionInterval::around(centers[i], half, scale);
  }
  return out;
}

std::vector<PredictionInterval> fixed_multiplier_intervals(
    std::span<const double> centers, std::span<const double> scales,
    double multiplier) {
  if (scales.size() != centers.size()) {
    throw DimensionError("centers and scales have different lengths");
  }
  std::vector<PredictionInterval> out(centers.size());
  for (std::size_t i = 0; i < centers.size(); ++i) {
    const double half = multiplier * scales[i];
    out[i] = PredictionInterval::around(centers[i], half, scales[i]);
  }
  return out;
}

void to_json(nlohmann::json& j, const CalibrationResult& c) {
  j = nlohmann::json{
      {"kind", scale_kind_name(c.kind)},
      {"alpha", c.alpha},
      {"epsilon", c.epsilon},
      {"n_cal", c.n_cal},
      {"q_hat", json_real(c.q_hat)},
  };
}

void from_json(const nlohmann::json& j, CalibrationResult& c) {
  c.kind = scale_kind_from_name(j.at("kind").get<std::string>());
  c.alpha = j.at("alpha").get<double>();
  c.epsilon = j.at("epsilon").get<double>();
  c.n_cal = j.at("n_cal").get<std::size_t>();
  c.q_hat = real_from_json(j.at("q_hat"));
}

}  // namespace tessera
