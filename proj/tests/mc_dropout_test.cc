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

#include "tessera/mc_dropout.h"

#include <cmath>
#include <vector>

#include "gtest/gtest.h"
#include "tessera/error.h"

namespace tessera {
namespace {

DropoutMlp ones_net(double rate) {
  // 3 inputs -> 4 linear hidden units -> 1 output, every weight 1.
  Mlp net({3, 4, 1}, {Activation::kIdentity});
  net.mutable_params().setConstant(1.0);
  net.mutable_bias(0).setZero();
  net.mutable_bias(1).setZero();
  return {net, rate};
}

TEST(McDropout, ZeroRateIsDeterministic) {
  Rng rng(1);
  const McPrediction p = mc_predict(ones_net(0.0), Vector::Ones(3), 20, rng);
  EXPECT_EQ(p.variance, 0.0);
  EXPECT_EQ(p.mean, 12.0);
}

TEST(McDropout, AnalyticMaskVariance) {
  // Each hidden unit outputs 3; inverted masks are 0 or 1/(1-p) with
  // variance p/(1-p), so Var(output) = 4 * 3^2 * p/(1-p) = 36 at p = 0.5.
  Rng rng(2);
  const McPrediction p = mc_predict(ones_net(0.5), Vector::Ones(3), 100000, rng);
  EXPECT_NEAR(p.variance, 36.0, 0.05 * 36.0);
  EXPECT_NEAR(p.mean, 12.0, 0.1);
}

TEST(McDropout, FixedSeedReproducible) {
  Rng a(3), b(3);
  Matrix x(2, 3);
  x << 1, 2, 3, -1, 0, 1;
  const auto pa = mc_predict_batch(ones_net(0.3), x, 30, a);
  const auto pb = mc_predict_batch(ones_net(0.3), x, 30, b);
  for (int i = 0; i < 2; ++i) {
    EXPECT_EQ(pa[i].mean, pb[i].mean);
    EXPECT_EQ(pa[i].variance, pb[i].variance);
  }
}

TEST(McDropout, VarianceGrowsWithRate) {
  double previous = -1.0;
  for (double rate : {0.1, 0.3, 0.5}) {
    double total = 0.0;
    for (int seed = 0; seed < 20; ++seed) {
      Rng init(100 + seed);
      McDropoutConfig config;
      config.hidden = {32};
      config.activation = Activation::kTanh;
      config.rate = rate;
      const DropoutMlp model = make_dropout_mlp(2, config, init);
      Matrix x(10, 2);
      for (int i = 0; i < 10; ++i) {
        x(i, 0) = init.normal();
        x(i, 1) = init.normal();
      }
      Rng rng(seed);
      for (const McPrediction& p : mc_predict_batch(model, x, 200, rng)) {
        total += p.variance;
      }
    }
    EXPECT_GT(total, previous);
    previous = total;
  }
}

TEST(McDropout, MeanVarianceShrinksWithPasses) {
  Rng rng(4);
  const DropoutMlp model = ones_net(0.5);
  auto spread = [&](int passes) {
    std::vector<double> means;
    for (int r = 0; r < 400; ++r) {
      means.push_back(mc_predict(model, Vector::Ones(3), passes, rng).mean);
    }
    double m = 0.0;
    for (double v : means) m += v;
    m /= means.size();
    double s = 0.0;
    for (double v : means) s += (v - m) * (v - m);
    return s / (means.size() - 1);
  };
  // Var(mean) = 36 / T.
  const double v10 = spread(10);
  const double v160 = spread(160);
  EXPECT_NEAR(v10, 3.6, 0.6);
  EXPECT_GT(v10 / v160, 10.0);
  EXPECT_LT(v10 / v160, 25.0);
}

TEST(McDropout, PassesBelowTwoThrow) {
  Rng rng(5);
  EXPECT_THROW(mc_predict(ones_net(0.5), Vector::Ones(3), 1, rng),
               ConfigError);
}

TEST(McInterval, NormalQuantileHalfWidth) {
  const PredictionInterval iv = mc_interval(0.0, 1.0, 0.10);
  EXPECT_NEAR(iv.upper, 1.6449, 1e-4);
  EXPECT_NEAR(iv.lower, -1.6449, 1e-4);
  const PredictionInterval wide = mc_interval(0.0, 1.0, 0.05);
  EXPECT_LT(wide.lower, iv.lower);
  EXPECT_GT(wide.upper, iv.upper);
  const PredictionInterval point = mc_interval(2.0, 0.0, 0.10);
  EXPECT_EQ(point.lower, 2.0);
  EXPECT_EQ(point.upper, 2.0);
  EXPECT_THROW(mc_interval(0.0, -1.0, 0.1), DimensionError);
}

TEST(McTraining, ReducesErrorAndRoundTrips) {
  Rng data(6);
  Matrix x(500, 1);
  Vector y(500);
  for (int i = 0; i < 500; ++i) {
    x(i, 0) = data.uniform(-2, 2);
    y(i) = std::sin(2.0 * x(i, 0)) + 0.1 * data.normal();
  }
  McDropoutConfig config;
  config.hidden = {32};
  config.rate = 0.1;
  config.epochs = 30;
  config.learning_rate = 1e-2;
  Rng init(7);
  const McTrainResult a =
      train_mc_dropout(make_dropout_mlp(1, config, init), x, y, config, 8);
  ASSERT_EQ(a.train_mse.size(), 30u);
  EXPECT_LT(a.train_mse.back(), 0.5 * a.train_mse.front());
  Rng init2(7);
  const McTrainResult b =
      train_mc_dropout(make_dropout_mlp(1, config, init2), x, y, config, 8);
  EXPECT_EQ(a.train_mse, b.train_mse);

  const nlohmann::json j = a.model;
  const DropoutMlp back = j.get<DropoutMlp>();
  EXPECT_EQ(back.rate, a.model.rate);
  EXPECT_EQ(back.net.params(), a.model.net.params());
}

}  // namespace
}  // namespace tessera
