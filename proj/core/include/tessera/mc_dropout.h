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

// Monte Carlo dropout regressor: a scalar-output MLP whose hidden-layer
// dropout stays on at inference; T stochastic passes give a predictive mean
// and variance.

#ifndef TESSERA_MC_DROPOUT_H_
#define TESSERA_MC_DROPOUT_H_

#include <cstdint>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "tessera/conformal.h"
#include "tessera/mlp.h"
#include "tessera/rng.h"

namespace tessera {

struct DropoutMlp {
  Mlp net;            // output width 1
  double rate = 0.5;  // per hidden layer
};

struct McDropoutConfig {
  std::vector<int> hidden = {64};
  Activation activation = Activation::kRelu;
  double rate = 0.5;
  double learning_rate = 1e-3;
  int epochs = 50;
  int batch_size = 64;
  int passes = 50;
};

DropoutMlp make_dropout_mlp(int input_dim, const McDropoutConfig& config,
                            Rng& rng);

struct McTrainResult {
  DropoutMlp model;
  std::vector<double> train_mse;  // per epoch, deterministic-mode MSE
};

// Minibatch Adam on squared error with dropout active.
McTrainResult train_mc_dropout(DropoutMlp model, const Matrix& inputs,
                               const Vector& targets,
                               const McDropoutConfig& config,
                               std::uint64_t seed);

struct McPrediction {
  double mean = 0.0;
  double variance = 0.0;  // unbiased sample variance over passes
};

// Throws ConfigError if passes < 2.
McPrediction mc_predict(const DropoutMlp& model, const Vector& x, int passes,
                        Rng& rng);
std::vector<McPrediction> mc_predict_batch(const DropoutMlp& model,
                                           const Matrix& inputs, int passes,
                                           Rng& rng);

// mean +/- z_{1 - alpha/2} sqrt(variance).
PredictionInterval mc_interval(double mean, double variance, double alpha);

void to_json(nlohmann::json& j, const DropoutMlp& model);
void from_json(const nlohmann::json& j, DropoutMlp& model);

}  // namespace tessera

#endif  // TESSERA_MC_DROPOUT_H_
