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

#include "tessera/adam.h"

#include <cmath>
#include <limits>

#include "gtest/gtest.h"
#include "tessera/error.h"
#include "tessera/rng.h"

namespace tessera {
namespace {

TEST(Adam, ZeroGradientLeavesParameters) {
  AdamState state(3);
  Vector p(3);
  p << 1.0, -2.0, 3.0;
  const Vector before = p;
  adam_step(state, p, Vector::Zero(3));
  EXPECT_EQ(p, before);
  EXPECT_EQ(state.step_count(), 1);
}

TEST(Adam, FirstStepHandValue) {
  AdamState state(1, {.learning_rate = 1e-3});
  Vector p = Vector::Constant(1, 0.5);
  adam_step(state, p, Vector::Constant(1, 1.0));
  // m_hat = 1, v_hat = 1 after bias correction.
  EXPECT_NEAR(p(0) - 0.5, -1e-3 / (1.0 + 1e-8), 1e-18);
}

TEST(Adam, FirstStepIsSignTimesLearningRate) {
  AdamState state(2, {.learning_rate = 0.01});
  Vector p = Vector::Zero(2);
  Vector g(2);
  g << 250.0, -0.004;
  adam_step(state, p, g);
  EXPECT_NEAR(p(0), -0.01, 1e-9);
  EXPECT_NEAR(p(1), 0.01, 1e-7);
}

TEST(Adam, DeterministicTrajectories) {
  auto run = [] {
    Rng rng(4);
    AdamState state(5, {.learning_rate = 1e-2});
    Vector p = Vector::Zero(5);
    for (int t = 0; t < 50; ++t) {
      Vector g(5);
      for (int i = 0; i < 5; ++i) g(i) = rng.normal() + p(i);
      adam_step(state, p, g);
    }
    return p;
  };
  EXPECT_EQ(run(), run());
}

TEST(Adam, MinimizesQuadratic) {
  AdamState state(2, {.learning_rate = 0.05});
  Vector p(2);
  p << 3.0, -4.0;
  for (int t = 0; t < 2000; ++t) adam_step(state, p, 2.0 * p);
  EXPECT_LT(p.norm(), 1e-2);
}

TEST(Adam, NonFiniteGradientThrowsWithoutMutating) {
  AdamState state(2);
  Vector p = Vector::Ones(2);
  adam_step(state, p, Vector::Ones(2));
  const Vector before = p;
  const Vector m_before = state.first_moment();
  Vector bad(2);
  bad << 1.0, std::numeric_limits<double>::quiet_NaN();
  try {
    adam_step(state, p, bad);
    FAIL() << "expected TrainingError";
  } catch (const TrainingError& e) {
    EXPECT_EQ(e.step(), 2);
  }
  EXPECT_EQ(p, before);
  EXPECT_EQ(state.first_moment(), m_before);
  EXPECT_EQ(state.step_count(), 1);
}

TEST(Adam, SizeMismatchThrows) {
  AdamState state(2);
  Vector p = Vector::Ones(3);
  EXPECT_THROW(adam_step(state, p, Vector::Ones(3)), DimensionError);
}

}  // namespace
}  // namespace tessera
