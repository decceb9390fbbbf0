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

#include "tessera/moe.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <utility>

#include "tessera/adam.h"
#include "tessera/error.h"
#include "tessera/io.h"

namespace tessera {
namespace {

constexpr double kLogTwoPi = 1.8378770664093454835606594728112;

// Forward pass of gate and experts over a batch.
struct BatchForward {
  Matrix gate_logits;            // n x K
  std::vector<Matrix> outputs;   // per expert, n x 2 (mean, raw variance)
  MlpTape gate_tape;
  std::vector<MlpTape> expert_tapes;
};

BatchForward forward_batch(const MoeModel& model, const Matrix& inputs,
                           bool keep_tapes) {
  if (inputs.cols() != model.input_dim()) {
    throw DimensionError("MoE input has " + std::to_string(inputs.cols()) +
                         " features, model expects " +
                         std::to_string(model.input_dim()));
  }
  BatchForward f;
  const int k_count = model.num_experts();
  f.expert_tapes.resize(keep_tapes ? static_cast<std::size_t>(k_count) : 0);
  f.gate_logits =
      mlp_forward(model.gate(), inputs, keep_tapes ? &f.gate_tape : nullptr);
  for (int k = 0; k < k_count; ++k) {
    f.outputs.push_back(mlp_forward(
        model.expert(k), inputs,
        keep_tapes ? &f.expert_tapes[static_cast<std::size_t>(k)] : nullptr));
  }
  return f;
}

void check_config(const MoeConfig& c) {
  if (c.input_dim < 1) throw ConfigError("MoE input_dim must be >= 1");
  if (c.num_experts < 1) throw ConfigError("MoE needs at least one expert");
  if (c.expert_hidden < 1) throw ConfigError("expert_hidden must be >= 1");
  if (c.gate == GateKind::kMlp && c.gate_hidden < 1) {
    throw ConfigError("gate_hidden must be >= 1 for an MLP gate");
  }
  if (!(c.variance_floor > 0.0)) {
    throw ConfigError("variance_floor must be positive");
  }
}

}  // namespace

MoeModel::MoeModel(MoeConfig config, Mlp gate, std::vector<Mlp> experts)
    : config_(config), gate_(std::move(gate)), experts_(std::move(experts)) {
  check_config(config_);
  if (static_cast<int>(experts_.size()) != config_.num_experts) {
    throw DimensionError("expert count does not match config");
  }
  if (gate_.input_width() != config_.input_dim ||
      gate_.output_width() != config_.num_experts) {
    throw DimensionError("gate network shape does not match config");
  }
  for (const Mlp& e : experts_) {
    if (e.input_width() != config_.input_dim || e.output_width() != 2) {
      throw DimensionError("expert network shape does not match config");
    }
  }
}

MoeModel MoeModel::initialize(const MoeConfig& config, Rng& rng) {
  check_config(config);
  Rng gate_rng = rng.child("gate");
  Mlp gate = config.gate == GateKind::kLinear
                 ? Mlp::xavier({config.input_dim, config.num_experts}, {},
                               gate_rng)
                 : Mlp::xavier({config.input_dim, config.gate_hidden,
                                config.num_experts},
                               {Activation::kTanh}, gate_rng);
  std::vector<Mlp> experts;
  for (int k = 0; k < config.num_experts; ++k) {
    Rng expert_rng = rng.child("expert").child(static_cast<std::uint64_t>(k));
    experts.push_back(Mlp::xavier({config.input_dim, config.expert_hidden, 2},
                                  {config.expert_activation}, expert_rng));
  }
  return MoeModel(config, std::move(gate), std::move(experts));
}

Eigen::Index MoeModel::parameter_count() const {
  Eigen::Index n = static_cast<Eigen::Index>(gate_.parameter_count());
  for (const Mlp& e : experts_) n += static_cast<Eigen::Index>(e.parameter_count());
  return n;
}

Eigen::Index MoeModel::expert_offset(int k) const {
  Eigen::Index offset = static_cast<Eigen::Index>(gate_.parameter_count());
  for (int j = 0; j < k; ++j) {
    offset += static_cast<Eigen::Index>(expert(j).parameter_count());
  }
  return offset;
}

Vector MoeModel::flat_params() const {
  Vector out(parameter_count());
  Eigen::Index offset = 0;
  auto append = [&](const Mlp& net) {
    out.segment(offset, net.params().size()) = net.params();
    offset += net.params().size();
  };
  append(gate_);
  for (const Mlp& e : experts_) append(e);
  return out;
}

void MoeModel::set_flat_params(const Vector& params) {
  if (params.size() != parameter_count()) {
    throw DimensionError("flat parameter vector has the wrong length");
  }
  Eigen::Index offset = 0;
  auto take = [&](Mlp& net) {
    net.mutable_params() = params.segment(offset, net.params().size());
    offset += net.params().size();
  };
  take(gate_);
  for (Mlp& e : experts_) take(e);
}

MixturePrediction::MixturePrediction(Vector weights, Vector means,
                                     Vector variances)
    : weights_(std::move(weights)),
      means_(std::move(means)),
      variances_(std::move(variances)) {
  const Eigen::Index k = weights_.size();
  if (k == 0 || means_.size() != k || variances_.size() != k) {
    throw DimensionError("mixture components must share a positive length");
  }
  if ((weights_.array() < 0.0).any() ||
      std::abs(weights_.sum() - 1.0) > 1e-9) {
    throw DimensionError("mixture weights must form a probability vector");
  }
  if (!variances_.allFinite() || (variances_.array() <= 0.0).any()) {
    throw DimensionError("mixture variances must be positive and finite");
  }
  mean_ = weights_.dot(means_);
  unweighted_mean_ = means_.mean();
  aleatoric_ = std::sqrt(weights_.dot(variances_));
  const bool all_equal = (means_.array() == means_[0]).all();
  epistemic_ = all_equal
                   ? 0.0
                   : std::sqrt((means_.array() - unweighted_mean_)
                                   .square()
                                   .mean());
}

double log_mixture_pdf(const MixturePrediction& pred, double y) {
  std::vector<double> terms(static_cast<std::size_t>(pred.num_components()));
  for (int k = 0; k < pred.num_components(); ++k) {
    const double var = pred.variances()[k];
    const double diff = y - pred.means()[k];
    terms[static_cast<std::size_t>(k)] =
        std::log(pred.weights()[k]) - 0.5 * (kLogTwoPi + std::log(var)) -
        diff * diff / (2.0 * var);
  }
  return log_sum_exp(terms);
}

double mixture_pdf(const MixturePrediction& pred, double y) {
  return std::exp(log_mixture_pdf(pred, y));
}

std::vector<MixturePrediction> moe_forward_batch(const MoeModel& model,
                                                 const Matrix& inputs) {
  const BatchForward f = forward_batch(model, inputs, false);
  const int k_count = model.num_experts();
  const double floor = model.config().variance_floor;
  std::vector<MixturePrediction> out;
  out.reserve(static_cast<std::size_t>(inputs.rows()));
  for (Eigen::Index i = 0; i < inputs.rows(); ++i) {
    Vector means(k_count);
    Vector variances(k_count);
    for (int k = 0; k < k_count; ++k) {
      const Matrix& o = f.outputs[static_cast<std::size_t>(k)];
      means[k] = o(i, 0);
      variances[k] = softplus(o(i, 1)) + floor;
    }
    out.emplace_back(softmax(f.gate_logits.row(i).transpose()),
                     std::move(means), std::move(variances));
  }
  return out;
}

MixturePrediction moe_forward(const MoeModel& model, const Vector& x) {
  if (x.size() != model.input_dim()) {
    throw DimensionError("MoE input has the wrong dimension");
  }
  return std::move(moe_forward_batch(model, x.transpose()).front());
}

NllResult mixture_nll(const MoeModel& model, const Matrix& inputs,
                      const Vector& targets, bool with_grad) {
  const Eigen::Index n = inputs.rows();
  if (n == 0) throw DimensionError("mixture NLL of an empty batch");
  if (targets.size() != n) {
    throw DimensionError("targets and inputs have different lengths");
  }
  const BatchForward f = forward_batch(model, inputs, with_grad);
  const int k_count = model.num_experts();
  const double floor = model.config().variance_floor;
  const double inv_n = 1.0 / static_cast<double>(n);

  Matrix gate_up;
  std::vector<Matrix> expert_up;
  if (with_grad) {
    gate_up.resize(n, k_count);
    expert_up.assign(static_cast<std::size_t>(k_count), Matrix(n, 2));
  }

  std::vector<double> log_terms(static_cast<std::size_t>(k_count));
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto logits = f.gate_logits.row(i);
    const double log_norm = log_sum_exp(
        std::span<const double>(logits.data(), static_cast<std::size_t>(k_count)));
    const double y = targets[i];
    for (int k = 0; k < k_count; ++k) {
      const Matrix& o = f.outputs[static_cast<std::size_t>(k)];
      const double var = softplus(o(i, 1)) + floor;
      const double diff = y - o(i, 0);
      log_terms[static_cast<std::size_t>(k)] =
          logits[k] - log_norm - 0.5 * (kLogTwoPi + std::log(var)) -
          diff * diff / (2.0 * var);
    }
    const double log_p = log_sum_exp(log_terms);
    total -= log_p;
    if (!with_grad) continue;
    for (int k = 0; k < k_count; ++k) {
      const Matrix& o = f.outputs[static_cast<std::size_t>(k)];
      const double responsibility =
          std::exp(log_terms[static_cast<std::size_t>(k)] - log_p);
      const double weight = std::exp(logits[k] - log_norm);
      const double raw = o(i, 1);
      const double var = softplus(raw) + floor;
      const double diff = y - o(i, 0);
      gate_up(i, k) = (weight - responsibility) * inv_n;
      Matrix& up = expert_up[static_cast<std::size_t>(k)];
      up(i, 0) = -responsibility * diff / var * inv_n;
      up(i, 1) = responsibility *
                 (0.5 / var - diff * diff / (2.0 * var * var)) *
                 sigmoid(raw) * inv_n;
    }
  }

  NllResult result;
  result.loss = total * inv_n;
  if (!std::isfinite(result.loss)) {
    throw TrainingError("non-finite mixture NLL", 0);
  }
  if (!with_grad) return result;

  result.grad = Vector::Zero(model.parameter_count());
  const auto gate_count = static_cast<Eigen::Index>(model.gate().parameter_count());
  mlp_backward(model.gate(), f.gate_tape, gate_up,
               result.grad.segment(0, gate_count));
  for (int k = 0; k < k_count; ++k) {
    const auto count =
        static_cast<Eigen::Index>(model.expert(k).parameter_count());
    mlp_backward(model.expert(k), f.expert_tapes[static_cast<std::size_t>(k)],
                 expert_up[static_cast<std::size_t>(k)],
                 result.grad.segment(model.expert_offset(k), count));
  }
  return result;
}

TrainResult train_moe(MoeModel model, const Matrix& train_inputs,
                      const Vector& train_targets,
                      const Matrix& validation_inputs,
                      const Vector& validation_targets,
                      const TrainConfig& config) {
  if (config.epochs < 1 || config.batch_size < 1 ||
      !(config.learning_rate > 0.0)) {
    throw ConfigError("training needs epochs >= 1, batch_size >= 1, lr > 0");
  }
  if (train_inputs.rows() == 0 || validation_inputs.rows() == 0) {
    throw ConfigError("training and validation splits must be nonempty");
  }
  if (train_inputs.cols() != model.input_dim() ||
      validation_inputs.cols() != model.input_dim()) {
    throw DimensionError("inputs do not match the model input dimension");
  }
  if (train_targets.size() != train_inputs.rows() ||
      validation_targets.size() != validation_inputs.rows()) {
    throw DimensionError("inputs and targets differ in length");
  }
  Rng shuffle_rng = Rng(config.seed).child("moe-shuffle");
  AdamState adam(model.parameter_count(),
                 AdamConfig{.learning_rate = config.learning_rate});

  TrainResult result;
  auto evaluate = [&](int epoch) {
    try {
      result.train_nll.push_back(
          mixture_nll(model, train_inputs, train_targets, false).loss);
      result.validation_nll.push_back(
          mixture_nll(model, validation_inputs, validation_targets, false)
              .loss);
    } catch (const Error& e) {
      throw TrainingError(std::string("evaluation diverged: ") + e.what(),
                          epoch);
    }
  };
  evaluate(0);
  Vector best_params = model.flat_params();
  double best_val = result.validation_nll.back();

  std::vector<std::size_t> order(static_cast<std::size_t>(train_inputs.rows()));
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto batch = static_cast<std::size_t>(config.batch_size);
  Vector params = model.flat_params();

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    shuffle_rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::span<const std::size_t> rows(
          order.data() + start, std::min(batch, order.size() - start));
      try {
        const NllResult nll =
            mixture_nll(model, gather_rows(train_inputs, rows),
                        gather(train_targets, rows), true);
        adam_step(adam, params, nll.grad);
      } catch (const Error& e) {
        throw TrainingError(std::string("training diverged: ") + e.what(),
                            epoch);
      }
      model.set_flat_params(params);
    }
    evaluate(epoch);
    if (result.validation_nll.back() < best_val) {
      best_val = result.validation_nll.back();
      best_params = params;
      result.best_epoch = epoch;
    }
  }
  model.set_flat_params(best_params);
  result.model = std::move(model);
  return result;
}

std::string gate_kind_name(GateKind kind) {
  return kind == GateKind::kLinear ? "linear" : "mlp";
}

GateKind gate_kind_from_name(const std::string& name) {
  if (name == "linear") return GateKind::kLinear;
  if (name == "mlp") return GateKind::kMlp;
  throw ConfigError("unknown gate kind '" + name + "'");
}

void to_json(nlohmann::json& j, const MoeModel& model) {
  const MoeConfig& c = model.config();
  nlohmann::json experts = nlohmann::json::array();
  for (int k = 0; k < model.num_experts(); ++k) experts.push_back(model.expert(k));
  j = nlohmann::json{
      {"format", "tessera-moe"},
      {"version", 1},
      {"input_dim", c.input_dim},
      {"num_experts", c.num_experts},
      {"expert_hidden", c.expert_hidden},
      {"expert_activation", activation_name(c.expert_activation)},
      {"gate", gate_kind_name(c.gate)},
      {"gate_hidden", c.gate_hidden},
      {"variance_floor", c.variance_floor},
      {"gate_network", model.gate()},
      {"experts", experts},
  };
}

void from_json(const nlohmann::json& j, MoeModel& model) {
  if (j.value("format", "") != "tessera-moe" || j.value("version", 0) != 1) {
    throw ParseError("not a version-1 MoE checkpoint", 0);
  }
  MoeConfig c;
  c.input_dim = j.at("input_dim").get<int>();
  c.num_experts = j.at("num_experts").get<int>();
  c.expert_hidden = j.at("expert_hidden").get<int>();
  c.expert_activation =
      activation_from_name(j.at("expert_activation").get<std::string>());
  c.gate = gate_kind_from_name(j.at("gate").get<std::string>());
  c.gate_hidden = j.at("gate_hidden").get<int>();
  c.variance_floor = j.at("variance_floor").get<double>();
  Mlp gate = j.at("gate_network").get<Mlp>();
  std::vector<Mlp> experts;
  for (const auto& e : j.at("experts")) experts.push_back(e.get<Mlp>());
  model = MoeModel(c, std::move(gate), std::move(experts));
}

void save_checkpoint(const MoeModel& model, const std::string& path) {
  write_json_file(path, nlohmann::json(model));
}

MoeModel load_checkpoint(const std::string& path) {
  return read_json_file(path).get<MoeModel>();
}

}  // namespace tessera
