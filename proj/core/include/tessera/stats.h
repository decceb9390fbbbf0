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

// Correlation coefficients and two-sample tests. Undefined results (zero
// variance, constant input) are returned as NaN rather than thrown, so a
// report can still be written.

#ifndef TESSERA_STATS_H_
#define TESSERA_STATS_H_

#include <span>
#include <vector>

namespace tessera {

// 1-based ranks; tied values share the average of their ranks.
std::vector<double> average_ranks(std::span<const double> values);

double pearson(std::span<const double> a, std::span<const double> b);
double spearman(std::span<const double> a, std::span<const double> b);

// Kendall tau-b with tie correction in O(n log n) (Knight's algorithm).
double kendall_tau_b(std::span<const double> a, std::span<const double> b);

struct TestResult {
  double statistic = 0.0;
  double dof = 0.0;      // Welch only
  double p_value = 1.0;  // two-sided
};

// Welch's unequal-variance t test, Welch-Satterthwaite degrees of freedom,
// two-sided p from the Student t distribution.
TestResult welch_t_test(std::span<const double> a, std::span<const double> b);

// Mann-Whitney U (statistic = U of the first sample); normal approximation
// with tie and continuity corrections.
TestResult mann_whitney_u(std::span<const double> a, std::span<const double> b);

struct DisentangleStats {
  double pearson = 0.0;
  double spearman = 0.0;
  double kendall = 0.0;
  double welch_p = 1.0;
  double mann_whitney_p = 1.0;
};

// Agreement between two per-sample uncertainty signals: rank and linear
// correlations, and whether their marginal distributions differ.
// Requires equal lengths and n >= 3.
DisentangleStats disentangle_stats(std::span<const double> aleatoric,
                                   std::span<const double> epistemic);

}  // namespace tessera

#endif  // TESSERA_STATS_H_
