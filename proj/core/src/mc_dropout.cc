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

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tessera/adam.h"
#include "tessera/error.h"

namespace tessera {

DropoutMlp make_dropout_mlp(int input_dim, const McDropoutConfig& config,
                            Rng& rng) {
  if (!(config.rate >= 0.0 && config.rate < 1.0)) {
    throw ConfigError("dropout rate must lie in [0, 1)");
  }
  std::vector<int> widths = {input_dim};
  widths.insert(widths.end(), config.hidden.begin(), config.hidden.end());
  widths.push_back(1);
  std::vector<Activation> acts(config.hidden.size(), config.activation);
  return {Mlp::xavier(std::move(widths), std::move(acts), rng), config.rate};
}

McTrainResult train_mc_dropout(DropoutMlp model, const Matrix& inputs,
                               const Vector& targets,
                               const McDropoutConfig& config,
                               std::uint64_t seed) {
  if (inputs.rows() == 0 || inputs.rows() != targets.size()) {
    throw DimensionError("MC dropout training data is empty or ragged");
  }
  if (config.epochs < 1 || config.batch_size < 1) {
    throw ConfigError("MC dropout needs epochs >= 1 and batch_size >= 1");
  }
  Rng root(seed);
  Rng shuffle_rng = root.child("mc-shuffle");
  Rng mask_rng = root.child("mc-train-masks");
  AdamState adam(static_cast<Eigen::Index>(model.net.parameter_count()),
                 AdamConfig{.learning_rate = config.learning_rate});

  McTrainResult result;
  std::vector<std::size_t> order(static_cast<std::size_t>(inputs.rows()));
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto batch = static_cast<std::size_t>(config.batch_size);
  Vector grad(static_cast<Eigen::Index>(model.net.parameter_count()));
  MlpTape tape;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    shuffle_rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::span<const std::size_t> rows(
          order.data() + start, std::min(batch, order.size() - start));
      const Matrix x = gather_rows(inputs, rows);
      const Vector y = gather(targets, rows);
      try {
        const Matrix out = mlp_forward(model.net, x, &tape,
                                       DropoutSpec{model.rate, &mask_rng});
        // d/d out of mean squared error.
        const Matrix upstream =
            (out.col(0) - y) * (2.0 / static_cast<double>(rows.size()));
        grad.setZero();
        mlp_backward(model.net, tape, upstream, grad);
        adam_step(adam, model.net.mutable_params(), grad);
      } catch (const Error& e) {
        throw TrainingError(std::string("MC dropout training diverged: ") +
                                e.what(),
                            epoch);
      }
    }
    const Matrix out = mlp_forward(model.net, inputs);
    result.train_mse.push_back((out.col(0) - targets).squaredNorm() /
                               static_cast<double>(targets.size()));
  }
  result.model = std::move(model);
  return result;
}

std::vector<McPrediction> mc_predict_batch(const DropoutMlp& model,
                                           const Matrix& inputs, int passes,
                                           Rng& rng) {
  if (passes < 2) throw ConfigError("MC dropout needs at least 2 passes");
  const Eigen::Index n = inputs.rows();
  // Welford accumulation in pass order.
  Vector mean = Vector::Zero(n);
  Vector m2 = Vector::Zero(n);
  for (int t = 1; t <= passes; ++t) {
    const Matrix out =
        mlp_forward(model.net, inputs, nullptr, DropoutSpec{model.rate, &rng});
    const Vector delta = out.col(0) - mean;
    mean += delta / static_cast<double>(t);
    m2 += delta.cwiseProduct(out.col(0) - mean);
  }
  std::vector<McPrediction> preds(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    preds[static_cast<std::size_t>(i)] = {
        mean[i], std::max(0.0, m2[i] / static_cast<double>(passes - 1))};
  }
  return preds;
}

McPrediction mc_predict(const DropoutMlp& model, const Vector& x, int passes,
                        Rng& rng) {
  return mc_predict_batch(model, x.transpose(), passes, rng).front();
}

PredictionInterval mc_interval(double mean, double variance, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw ConfigError("alpha must lie in (0, 1)");
  }
  if (!(variance >= 0.0)) throw DimensionError("negative variance");
  const double sd = std::sqrt(variance);
  const double half = normal_quantile(1.0 - alpha / 2.0) * sd;
  return PredictionInterval::around(mean, half, sd);
}

void to_json(nlohmann::json& j, const DropoutMlp& model) {
  j = nlohmann::json{{"format", "tessera-mc-dropout"},
                     {"version", 1},
                     {"rate", model.rate},
                     {"network", model.net}};
}

void from_json(const nlohmann::json& j, DropoutMlp& model) {
  if (j.value("format", "") != "tessera-mc-dropout") {
    throw ParseError("not an MC dropout checkpoint", 0);
  }
  model.rate = j.at("rate").get<double>();
  model.net = j.at("network").get<Mlp>();
}

}  // namespace tessera
