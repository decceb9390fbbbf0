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

// Dense mixture-of-experts regressor with Gaussian experts.
//
// A gating network maps x to mixture weights w_k(x) (softmax). Every expert
// is a one-hidden-layer MLP with two outputs: the mean mu_k(x) and a raw
// variance r_k(x), turned into sigma_k^2(x) = softplus(r_k(x)) + floor. The
// predictive density is sum_k w_k N(y; mu_k, sigma_k^2), trained by mean
// negative log-likelihood. Two uncertainty scales are read off a prediction:
//
//   aleatoric  A(x) = sqrt(sum_k w_k sigma_k^2)
//   epistemic  E(x) = sqrt(mean_k (mu_k - mean_j mu_j)^2)   (gate-free)

#ifndef TESSERA_MOE_H_
#define TESSERA_MOE_H_

#include <cstdint>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "tessera/mlp.h"
#include "tessera/numerics.h"
#include "tessera/rng.h"

namespace tessera {

enum class GateKind { kLinear, kMlp };

struct MoeConfig {
  int input_dim = 1;
  int num_experts = 4;
  int expert_hidden = 64;
  Activation expert_activation = Activation::kTanh;
  GateKind gate = GateKind::kLinear;
  int gate_hidden = 32;  // only used by GateKind::kMlp
  double variance_floor = 1e-6;
};

class MoeModel {
 public:
  MoeModel() = default;
  MoeModel(MoeConfig config, Mlp gate, std::vector<Mlp> experts);

  static MoeModel initialize(const MoeConfig& config, Rng& rng);

  const MoeConfig& config() const { return config_; }
  int num_experts() const { return config_.num_experts; }
  int input_dim() const { return config_.input_dim; }
  const Mlp& gate() const { return gate_; }
  const Mlp& expert(int k) const {
    return experts_[static_cast<std::size_t>(k)];
  }
  Mlp& mutable_gate() { return gate_; }
  Mlp& mutable_expert(int k) { return experts_[static_cast<std::size_t>(k)]; }

  // Gate parameters first, then each expert in order.
  Eigen::Index parameter_count() const;
  Eigen::Index expert_offset(int k) const;
  Vector flat_params() const;
  void set_flat_params(const Vector& params);

 private:
  MoeConfig config_;
  Mlp gate_;
  std::vector<Mlp> experts_;
};

// Per-sample mixture (w, mu, sigma^2) with the derived summaries.
class MixturePrediction {
 public:
  // Throws DimensionError unless the three vectors share a positive length,
  // weights form a probability vector (tolerance 1e-9) and variances are
  // positive and finite.
  MixturePrediction(Vector weights, Vector means, Vector variances);

  int num_components() const { return static_cast<int>(weights_.size()); }
  const Vector& weights() const { return weights_; }
  const Vector& means() const { return means_; }
  const Vector& variances() const { return variances_; }

  double mean() const { return mean_; }
  double unweighted_mean() const { return unweighted_mean_; }
  double aleatoric() const { return aleatoric_; }
  double epistemic() const { return epistemic_; }

 private:
  Vector weights_;
  Vector means_;
  Vector variances_;
  double mean_ = 0.0;
  double unweighted_mean_ = 0.0;
  double aleatoric_ = 0.0;
  double epistemic_ = 0.0;
};

inline double predictive_mean(const MixturePrediction& p) { return p.mean(); }
inline double aleatoric_scale(const MixturePrediction& p) {
  return p.aleatoric();
}
inline double epistemic_scale(const MixturePrediction& p) {
  return p.epistemic();
}

double mixture_pdf(const MixturePrediction& pred, double y);
// log p(y|x) via log-sum-exp of the component log densities.
double log_mixture_pdf(const MixturePrediction& pred, double y);

MixturePrediction moe_forward(const MoeModel& model, const Vector& x);
std::vector<MixturePrediction> moe_forward_batch(const MoeModel& model,
                                                 const Matrix& inputs);

struct NllResult {
  double loss = 0.0;
  Vector grad;  // empty when gradients were not requested
};

// Mean negative log-likelihood of `targets` under the mixture, with exact
// gradients w.r.t. flat_params(). Throws TrainingError on a non-finite loss.
NllResult mixture_nll(const MoeModel& model, const Matrix& inputs,
                      const Vector& targets, bool with_grad = true);

struct TrainConfig {
  int epochs = 100;
  int batch_size = 64;
  double learning_rate = 1e-4;
  std::uint64_t seed = 0;
};

struct TrainResult {
  MoeModel model;  // parameters at the best validation NLL
  // Index 0 holds the NLL before the first update, index e the NLL after
  // epoch e.
  std::vector<double> train_nll;
  std::vector<double> validation_nll;
  int best_epoch = 0;
};

// Minibatch Adam on the mixture NLL. Throws TrainingError carrying the epoch
// index when the loss diverges.
TrainResult train_moe(MoeModel model, const Matrix& train_inputs,
                      const Vector& train_targets,
                      const Matrix& validation_inputs,
                      const Vector& validation_targets,
                      const TrainConfig& config);

std::string gate_kind_name(GateKind kind);
GateKind gate_kind_from_name(const std::string& name);

void to_json(nlohmann::json& j, const MoeModel& model);
void from_json(const nlohmann::json& j, MoeModel& model);

void save_checkpoint(const MoeModel& model, const std::string& path);
MoeModel load_checkpoint(const std::string& path);

}  // namespace tessera

#endif  // TESSERA_MOE_H_
