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

#include <cmath>
#include <limits>
#include <vector>

#include "gtest/gtest.h"
#include "tessera/error.h"
#include "tessera/rng.h"

namespace tessera {
namespace {

TEST(Softmax, UniformLogits) {
  const Vector p = softmax(Vector::Zero(4));
  for (int i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(p(i), 0.25);
}

TEST(Softmax, HandValue) {
  Vector logits(2);
  logits << std::log(2.0), 0.0;
  const Vector p = softmax(logits);
  EXPECT_NEAR(p(0), 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(p(1), 1.0 / 3.0, 1e-15);
}

TEST(Softmax, ShiftInvariance) {
  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    Vector v(5);
    for (int i = 0; i < 5; ++i) v(i) = rng.normal(0, 3);
    const double c = rng.uniform(-100, 100);
    const Vector a = softmax(v);
    const Vector b = softmax((v.array() + c).matrix());
    for (int i = 0; i < 5; ++i) EXPECT_NEAR(a(i), b(i), 1e-12);
  }
}

TEST(Softmax, ProbabilityVectorForLargeInputs) {
  Rng rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    Vector v(6);
    for (int i = 0; i < 6; ++i) v(i) = rng.uniform(-1e3, 1e3);
    const Vector p = softmax(v);
    for (int i = 0; i < 6; ++i) {
      ASSERT_TRUE(std::isfinite(p(i)));
      ASSERT_GE(p(i), 0.0);
    }
    EXPECT_NEAR(p.sum(), 1.0, 1e-12);
  }
}

TEST(Softmax, EmptyThrows) {
  EXPECT_THROW(softmax(Vector()), DimensionError);
}

TEST(LogSumExp, MatchesDirectAndHandlesExtremes) {
  const std::vector<double> v = {0.1, -2.0, 1.5};
  double direct = 0.0;
  for (double x : v) direct += std::exp(x);
  EXPECT_NEAR(log_sum_exp(v), std::log(direct), 1e-14);
  const std::vector<double> big = {1000.0, 1000.0};
  EXPECT_NEAR(log_sum_exp(big), 1000.0 + std::log(2.0), 1e-12);
  EXPECT_EQ(log_sum_exp(std::vector<double>{}),
            -std::numeric_limits<double>::infinity());
}

TEST(Softplus, StableAtExtremes) {
  EXPECT_NEAR(softplus(0.0), std::log(2.0), 1e-15);
  EXPECT_DOUBLE_EQ(softplus(800.0), 800.0);
  EXPECT_GT(softplus(-800.0), -1.0);
  EXPECT_NEAR(sigmoid(0.0), 0.5, 1e-15);
  EXPECT_NEAR(sigmoid(-800.0), 0.0, 1e-300);
}

TEST(FiniteDifference, QuadraticGradient) {
  Vector x(3);
  x << 1.0, -2.0, 0.5;
  const Vector g = finite_difference_gradient(
      [](const Vector& p) { return p.squaredNorm() + 3.0 * p(0); }, x);
  EXPECT_NEAR(g(0), 5.0, 1e-8);
  EXPECT_NEAR(g(1), -4.0, 1e-8);
  EXPECT_NEAR(g(2), 1.0, 1e-8);
}

TEST(Normal, QuantileAndCdf) {
  EXPECT_NEAR(normal_quantile(0.95), 1.6448536269514722, 1e-12);
  EXPECT_NEAR(normal_quantile(0.975), 1.959963984540054, 1e-12);
  EXPECT_NEAR(normal_cdf(normal_quantile(0.3)), 0.3, 1e-14);
  EXPECT_DOUBLE_EQ(normal_cdf(0.0), 0.5);
}

TEST(Gather, SelectsRowsInOrder) {
  Matrix m(3, 2);
  m << 1, 2, 3, 4, 5, 6;
  const std::vector<std::size_t> rows = {2, 0};
  const Matrix g = gather_rows(m, rows);
  EXPECT_EQ(g(0, 0), 5);
  EXPECT_EQ(g(1, 1), 2);
  Vector v(3);
  v << 7, 8, 9;
  EXPECT_EQ(gather(v, rows)(0), 9);
}

}  // namespace
}  // namespace tessera
