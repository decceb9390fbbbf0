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

// Shared helpers for the unit and acceptance tests.

#ifndef TESSERA_TESTS_FIXTURES_H_
#define TESSERA_TESTS_FIXTURES_H_

#include <cstdint>
#include <vector>

#include "tessera/dataset.h"
#include "tessera/moe.h"
#include "tessera/numerics.h"

namespace tessera::testing {

inline std::vector<double> to_std(const Vector& v) {
  return {v.data(), v.data() + v.size()};
}

// Consecutive train / validation / calibration / test slices of one
// heteroscedastic sample.
struct HarnessSpec {
  std::size_t n_train = 4000;
  std::size_t n_val = 1000;
  std::size_t n_cal = 2000;
  std::size_t n_test = 2000;
  int d = 4;
  NoiseProfile noise = noise_profile_from_name("step");
  MoeConfig model{.input_dim = 4, .num_experts = 4, .expert_hidden = 32};
  TrainConfig train{.epochs = 100, .batch_size = 64, .learning_rate = 1e-3};
};

struct HarnessFit {
  std::vector<MixturePrediction> cal;
  std::vector<MixturePrediction> test;
  std::vector<double> y_cal;
  std::vector<double> y_test;
  std::vector<double> sigma_test;
};

inline HarnessFit fit_harness(const HarnessSpec& spec, std::uint64_t seed) {
  const std::size_t n = spec.n_train + spec.n_val + spec.n_cal + spec.n_test;
  const Dataset ds = gen_heteroscedastic(n, spec.d, spec.noise, seed);
  const auto rows = [&](std::size_t start, std::size_t count) {
    return Matrix(ds.features.middleRows(static_cast<Eigen::Index>(start),
                                         static_cast<Eigen::Index>(count)));
  };
  const auto targets = [&](std::size_t start, std::size_t count) {
    return Vector(ds.targets.segment(static_cast<Eigen::Index>(start),
                                     static_cast<Eigen::Index>(count)));
  };
  const std::size_t val = spec.n_train;
  const std::size_t cal = val + spec.n_val;
  const std::size_t test = cal + spec.n_cal;

  MoeConfig model = spec.model;
  model.input_dim = spec.d;
  Rng init = Rng(seed).child("init");
  TrainConfig train = spec.train;
  train.seed = Rng(seed).child("train").seed();
  const TrainResult fitted = train_moe(
      MoeModel::initialize(model, init), rows(0, spec.n_train),
      targets(0, spec.n_train), rows(val, spec.n_val),
      targets(val, spec.n_val), train);

  HarnessFit out;
  out.cal = moe_forward_batch(fitted.model, rows(cal, spec.n_cal));
  out.test = moe_forward_batch(fitted.model, rows(test, spec.n_test));
  out.y_cal = to_std(targets(cal, spec.n_cal));
  out.y_test = to_std(targets(test, spec.n_test));
  out.sigma_test = to_std(ds.noise_std.segment(
      static_cast<Eigen::Index>(test), static_cast<Eigen::Index>(spec.n_test)));
  return out;
}

inline std::vector<double> centers_of(
    const std::vector<MixturePrediction>& preds) {
  std::vector<double> out;
  out.reserve(preds.size());
  for (const MixturePrediction& p : preds) out.push_back(p.mean());
  return out;
}

}  // namespace tessera::testing

#endif  // TESSERA_TESTS_FIXTURES_H_
