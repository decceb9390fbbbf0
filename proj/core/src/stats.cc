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

#include "tessera/stats.h"

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>

#include "tessera/error.h"

namespace tessera {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_paired(std::span<const double> a, std::span<const double> b,
                  std::size_t min_n) {
  if (a.size() != b.size()) throw DimensionError("samples differ in length");
  if (a.size() < min_n) {
    throw DimensionError("need at least " + std::to_string(min_n) +
                         " paired samples");
  }
}

double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) /
         static_cast<double>(v.size());
}

double sample_variance(std::span<const double> v, double mean) {
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return ss / static_cast<double>(v.size() - 1);
}

// Sum over runs of equal values of t(t-1)/2, for a sorted range.
template <typename Equal>
std::int64_t tied_pairs(std::size_t n, Equal equal) {
  std::int64_t total = 0;
  std::size_t run = 1;
  for (std::size_t i = 1; i <= n; ++i) {
    if (i < n && equal(i - 1, i)) {
      ++run;
    } else {
      total += static_cast<std::int64_t>(run) * static_cast<std::int64_t>(run - 1) / 2;
      run = 1;
    }
  }
  return total;
}

// Sorts `v` ascending, returning the number of inversions removed.
std::int64_t merge_count(std::vector<double>& v, std::vector<double>& scratch,
                         std::size_t lo, std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::int64_t swaps = merge_count(v, scratch, lo, mid) +
                       merge_count(v, scratch, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      swaps += static_cast<std::int64_t>(mid - i);
      scratch[k++] = v[j++];
    } else {
      scratch[k++] = v[i++];
    }
  }
  while (i < mid) scratch[k++] = v[i++];
  while (j < hi) scratch[k++] = v[j++];
  std::copy(scratch.begin() + static_cast<std::ptrdiff_t>(lo),
            scratch.begin() + static_cast<std::ptrdiff_t>(hi),
            v.begin() + static_cast<std::ptrdiff_t>(lo));
  return swaps;
}

}  // namespace

std::vector<double> average_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return values[x] < values[y];
  });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

double pearson(std::span<const double> a, std::span<const double> b) {
  check_paired(a, b, 2);
  const double ma = mean_of(a);
  const double mb = mean_of(b);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return kNaN;
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

double spearman(std::span<const double> a, std::span<const double> b) {
  check_paired(a, b, 2);
  const std::vector<double> ra = average_ranks(a);
  const std::vector<double> rb = average_ranks(b);
  return pearson(ra, rb);
}

double kendall_tau_b(std::span<const double> a, std::span<const double> b) {
  check_paired(a, b, 2);
  const std::size_t n = a.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return a[x] != a[y] ? a[x] < a[y] : b[x] < b[y];
  });
  const std::int64_t ties_a = tied_pairs(n, [&](std::size_t i, std::size_t j) {
    return a[order[i]] == a[order[j]];
  });
  const std::int64_t ties_joint =
      tied_pairs(n, [&](std::size_t i, std::size_t j) {
        return a[order[i]] == a[order[j]] && b[order[i]] == b[order[j]];
      });
  std::vector<double> bs(n);
  for (std::size_t i = 0; i < n; ++i) bs[i] = b[order[i]];
  std::vector<double> scratch(n);
  const std::int64_t swaps = merge_count(bs, scratch, 0, n);
  const std::int64_t ties_b = tied_pairs(
      n, [&](std::size_t i, std::size_t j) { return bs[i] == bs[j]; });

  const std::int64_t total = static_cast<std::int64_t>(n) *
                             static_cast<std::int64_t>(n - 1) / 2;
  const std::int64_t numerator =
      total - ties_a - ties_b + ties_joint - 2 * swaps;
  const double denominator = std::sqrt(static_cast<double>(total - ties_a) *
                                       static_cast<double>(total - ties_b));
  if (denominator == 0.0) return kNaN;
  return static_cast<double>(numerator) / denominator;
}

TestResult welch_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) {
    throw DimensionError("Welch's t test needs two samples of size >= 2");
  }
  const double ma = mean_of(a);
  const double mb = mean_of(b);
  const double va = sample_variance(a, ma) / static_cast<double>(a.size());
  const double vb = sample_variance(b, mb) / static_cast<double>(b.size());
  const double se2 = va + vb;
  TestResult r;
  if (se2 == 0.0) {
    r.statistic = kNaN;
    r.dof = kNaN;
    r.p_value = kNaN;
    return r;
  }
  r.statistic = (ma - mb) / std::sqrt(se2);
  r.dof = se2 * se2 /
          (va * va / static_cast<double>(a.size() - 1) +
           vb * vb / static_cast<double>(b.size() - 1));
  const boost::math::students_t dist(r.dof);
  r.p_value = 2.0 * boost::math::cdf(boost::math::complement(
                        dist, std::abs(r.statistic)));
  r.p_value = std::min(r.p_value, 1.0);
  return r;
}

TestResult mann_whitney_u(std::span<const double> a,
                          std::span<const double> b) {
  if (a.empty() || b.empty()) {
    throw DimensionError("Mann-Whitney U needs two nonempty samples");
  }
  const std::size_t n1 = a.size();
  const std::size_t n2 = b.size();
  const std::size_t n = n1 + n2;
  std::vector<double> pooled(a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  const std::vector<double> ranks = average_ranks(pooled);
  const double rank_sum_a =
      std::accumulate(ranks.begin(), ranks.begin() + static_cast<std::ptrdiff_t>(n1), 0.0);
  const double dn1 = static_cast<double>(n1);
  const double dn2 = static_cast<double>(n2);
  const double dn = static_cast<double>(n);

  std::vector<double> sorted = pooled;
  std::sort(sorted.begin(), sorted.end());
  double tie_term = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && sorted[j] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i);
    tie_term += t * t * t - t;
    i = j;
  }

  TestResult r;
  r.statistic = rank_sum_a - dn1 * (dn1 + 1.0) / 2.0;
  const double mean_u = dn1 * dn2 / 2.0;
  const double var_u =
      dn1 * dn2 / 12.0 * ((dn + 1.0) - tie_term / (dn * (dn - 1.0)));
  if (!(var_u > 0.0)) {
    r.p_value = kNaN;
    return r;
  }
  const double shifted = std::max(0.0, std::abs(r.statistic - mean_u) - 0.5);
  const double z = shifted / std::sqrt(var_u);
  r.dof = 0.0;
  r.p_value = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
  return r;
}

DisentangleStats disentangle_stats(std::span<const double> aleatoric,
                                   std::span<const double> epistemic) {
  check_paired(aleatoric, epistemic, 3);
  DisentangleStats s;
  s.pearson = pearson(aleatoric, epistemic);
  s.spearman = spearman(aleatoric, epistemic);
  s.kendall = kendall_tau_b(aleatoric, epistemic);
  s.welch_p = welch_t_test(aleatoric, epistemic).p_value;
  s.mann_whitney_p = mann_whitney_u(aleatoric, epistemic).p_value;
  return s;
}

}  // namespace tessera
