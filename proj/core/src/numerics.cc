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

#include "tessera/numerics.h"

#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <limits>

#include "tessera/error.h"

namespace tessera {

Vector softmax(const Vector& logits) {
  if (logits.size() == 0) throw DimensionError("softmax of an empty vector");
  const double max_logit = logits.maxCoeff();
  Vector out = (logits.array() - max_logit).exp();
  out /= out.sum();
  return out;
}

double log_sum_exp(std::span<const double> values) {
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  if (values.empty()) return kNegInf;
  const double max_value = *std::max_element(values.begin(), values.end());
  if (max_value == kNegInf) return kNegInf;
  double sum = 0.0;
  for (double v : values) sum += std::exp(v - max_value);
  return max_value + std::log(sum);
}

double softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Vector finite_difference_gradient(const std::function<double(const Vector&)>& f,
                                  Vector params, double h) {
  Vector grad(params.size());
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    params[i] = saved + h;
    const double up = f(params);
    params[i] = saved - h;
    const double down = f(params);
    params[i] = saved;
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw DimensionError("normal quantile requires 0 < p < 1");
  }
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

Matrix gather_rows(const Matrix& m, std::span<const std::size_t> rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) =
        m.row(static_cast<Eigen::Index>(rows[i]));
  }
  return out;
}

Vector gather(const Vector& v, std::span<const std::size_t> rows) {
  Vector out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out[static_cast<Eigen::Index>(i)] = v[static_cast<Eigen::Index>(rows[i])];
  }
  return out;
}

}  // namespace tessera
