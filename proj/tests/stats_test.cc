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

#include <cmath>
#include <vector>

#include "gtest/gtest.h"
#include "tessera/error.h"
#include "tessera/rng.h"

namespace tessera {
namespace {

double pair_count_tau_b(const std::vector<double>& a,
                        const std::vector<double>& b) {
  long long concordant = 0, discordant = 0, ties_a = 0, ties_b = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = i + 1; j < a.size(); ++j) {
      const double da = a[i] - a[j], db = b[i] - b[j];
      if (da == 0 && db == 0) continue;
      if (da == 0) {
        ++ties_a;
      } else if (db == 0) {
        ++ties_b;
      } else if ((da > 0) == (db > 0)) {
        ++concordant;
      } else {
        ++discordant;
      }
    }
  }
  return (concordant - discordant) /
         std::sqrt(static_cast<double>(concordant + discordant + ties_a) *
                   static_cast<double>(concordant + discordant + ties_b));
}

// Spearman as Pearson on ranks computed by O(n^2) counting.
double brute_force_spearman(const std::vector<double>& a,
                            const std::vector<double>& b) {
  auto ranks = [](const std::vector<double>& v) {
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      double less = 0, equal = 0;
      for (double w : v) {
        if (w < v[i]) ++less;
        if (w == v[i]) ++equal;
      }
      r[i] = less + (equal + 1.0) / 2.0;
    }
    return r;
  };
  return pearson(ranks(a), ranks(b));
}

TEST(Ranks, TiesShareAverage) {
  const std::vector<double> v = {10, 20, 10, 30, 20, 20};
  const std::vector<double> r = average_ranks(v);
  EXPECT_EQ(r, (std::vector<double>{1.5, 4, 1.5, 6, 4, 4}));
}

TEST(Correlation, IdenticalSignals) {
  Rng rng(1);
  std::vector<double> a(100);
  for (double& x : a) x = rng.normal();
  EXPECT_NEAR(pearson(a, a), 1.0, 1e-15);
  EXPECT_NEAR(spearman(a, a), 1.0, 1e-15);
  EXPECT_NEAR(kendall_tau_b(a, a), 1.0, 1e-15);
}

TEST(Correlation, IndependentSamplesNearZero) {
  Rng rng(2);
  std::vector<double> a(10000), b(10000);
  for (int i = 0; i < 10000; ++i) {
    a[i] = rng.normal();
    b[i] = rng.normal();
  }
  EXPECT_NEAR(pearson(a, b), 0.0, 0.03);
  EXPECT_NEAR(spearman(a, b), 0.0, 0.03);
  EXPECT_NEAR(kendall_tau_b(a, b), 0.0, 0.03);
}

TEST(Correlation, FixtureMatchesReferenceValues) {
  const std::vector<double> x = {3, 1, 4, 1, 5, 9, 2, 6};
  const std::vector<double> y = {2, 7, 1, 8, 2, 8, 1, 8};
  EXPECT_NEAR(kendall_tau_b(x, y), pair_count_tau_b(x, y), 1e-15);
  EXPECT_NEAR(kendall_tau_b(x, y), 0.16051447078102563, 1e-14);
  EXPECT_NEAR(spearman(x, y), 0.19885368120992467, 1e-14);
  EXPECT_NEAR(pearson(x, y), 0.20965531907301216, 1e-14);
}

TEST(Correlation, KendallMatchesPairCounting) {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng.uniform_index(49);
    std::vector<double> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = std::round(rng.normal() * 2.0);
      b[i] = trial % 2 ? rng.normal() : std::round(rng.normal() * 2.0);
    }
    const double expected = pair_count_tau_b(a, b);
    const double got = kendall_tau_b(a, b);
    if (std::isnan(expected)) {
      EXPECT_TRUE(std::isnan(got));
    } else {
      EXPECT_NEAR(got, expected, 1e-12);
      EXPECT_GE(got, -1.0);
      EXPECT_LE(got, 1.0);
    }
  }
}

TEST(Correlation, SpearmanMatchesBruteForce) {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> a(5 + trial % 20), b(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      a[i] = std::round(rng.normal() * 2.0);
      b[i] = rng.normal();
    }
    const double s = spearman(a, b);
    if (std::isnan(s)) continue;
    EXPECT_NEAR(s, brute_force_spearman(a, b), 1e-12);
    EXPECT_GE(pearson(a, b), -1.0);
    EXPECT_LE(pearson(a, b), 1.0);
  }
}

TEST(Correlation, ConstantInputIsUndefined) {
  const std::vector<double> c = {1, 1, 1, 1}, v = {1, 2, 3, 4};
  EXPECT_TRUE(std::isnan(pearson(c, v)));
  EXPECT_TRUE(std::isnan(spearman(c, v)));
  EXPECT_TRUE(std::isnan(kendall_tau_b(c, v)));
  const std::vector<double> short_v = {1, 2};
  EXPECT_THROW(pearson(short_v, v), DimensionError);
}

TEST(Welch, ReferenceValues) {
  const std::vector<double> a = {1.2, 2.3, 3.1, 4.8, 5.0, 2.3};
  const std::vector<double> b = {2.2, 3.9, 4.1, 6.0, 7.5, 8.1, 3.9};
  const TestResult r = welch_t_test(a, b);
  EXPECT_NEAR(r.statistic, -1.9420710907304655, 1e-12);
  EXPECT_NEAR(r.dof, 10.64775444822889, 1e-10);
  EXPECT_NEAR(r.p_value, 0.07903790906626912, 1e-10);
}

TEST(MannWhitney, ReferenceValues) {
  const std::vector<double> a = {1.2, 2.3, 3.1, 4.8, 5.0, 2.3};
  const std::vector<double> b = {2.2, 3.9, 4.1, 6.0, 7.5, 8.1, 3.9};
  const TestResult r = mann_whitney_u(a, b);
  EXPECT_EQ(r.statistic, 11.0);
  EXPECT_NEAR(r.p_value, 0.17354949511417161, 1e-12);
}

TEST(Tests, IdenticalAndShiftedSamples) {
  Rng rng(5);
  std::vector<double> x(200), y(200);
  for (int i = 0; i < 200; ++i) {
    x[i] = rng.normal();
    y[i] = rng.normal() + 2.0;
  }
  EXPECT_GT(welch_t_test(x, x).p_value, 0.9);
  EXPECT_GT(mann_whitney_u(x, x).p_value, 0.9);
  EXPECT_LT(welch_t_test(x, y).p_value, 1e-6);
  EXPECT_LT(mann_whitney_u(x, y).p_value, 1e-6);
}

TEST(Disentangle, IdenticalSignals) {
  const std::vector<double> a = {0.1, 0.5, 0.3, 0.9, 0.7};
  const DisentangleStats s = disentangle_stats(a, a);
  EXPECT_NEAR(s.pearson, 1.0, 1e-15);
  EXPECT_NEAR(s.spearman, 1.0, 1e-15);
  EXPECT_NEAR(s.kendall, 1.0, 1e-15);
  EXPECT_GT(s.welch_p, 0.9);
  const std::vector<double> two = {1.0, 2.0};
  EXPECT_THROW(disentangle_stats(two, two), DimensionError);
}

}  // namespace
}  // namespace tessera
