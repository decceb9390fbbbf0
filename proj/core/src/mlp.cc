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

#include "tessera/mlp.h"

#include <cmath>
#include <utility>

#include "tessera/error.h"

namespace tessera {
namespace {

void apply_activation(Activation a, Matrix& m) {
  switch (a) {
    case Activation::kIdentity:
      break;
    case Activation::kTanh:
      m = m.array().tanh().matrix();
      break;
    case Activation::kRelu:
      m = m.cwiseMax(0.0);
      break;
  }
}

// Multiplies `delta` in place by the activation derivative at `pre`.
void apply_activation_grad(Activation a, const Matrix& pre, Matrix& delta) {
  switch (a) {
    case Activation::kIdentity:
      break;
    case Activation::kTanh:
      delta.array() *= 1.0 - pre.array().tanh().square();
      break;
    case Activation::kRelu:
      delta.array() *= (pre.array() > 0.0).cast<double>();
      break;
  }
}

}  // namespace

std::string activation_name(Activation a) {
  switch (a) {
    case Activation::kIdentity:
      return "identity";
    case Activation::kTanh:
      return "tanh";
    case Activation::kRelu:
      return "relu";
  }
  return "identity";
}

Activation activation_from_name(const std::string& name) {
  if (name == "identity") return Activation::kIdentity;
  if (name == "tanh") return Activation::kTanh;
  if (name == "relu") return Activation::kRelu;
  throw ConfigError("unknown activation '" + name + "'");
}

Mlp::Mlp(std::vector<int> widths, std::vector<Activation> hidden_activations)
    : widths_(std::move(widths)), activations_(std::move(hidden_activations)) {
  if (widths_.size() < 2) {
    throw DimensionError("an MLP needs at least input and output widths");
  }
  for (int w : widths_) {
    if (w < 1) throw DimensionError("MLP layer widths must be positive");
  }
  if (activations_.size() != widths_.size() - 2) {
    throw DimensionError("expected one activation per hidden layer");
  }
  Eigen::Index offset = 0;
  for (int l = 0; l < layer_count(); ++l) {
    offsets_.push_back(offset);
    offset += static_cast<Eigen::Index>(widths_[l]) * widths_[l + 1] +
              widths_[l + 1];
  }
  params_ = Vector::Zero(offset);
}

Mlp Mlp::xavier(std::vector<int> widths,
                std::vector<Activation> hidden_activations, Rng& rng) {
  Mlp net(std::move(widths), std::move(hidden_activations));
  for (int l = 0; l < net.layer_count(); ++l) {
    const double fan_in = net.widths_[l];
    const double fan_out = net.widths_[l + 1];
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    auto w = net.mutable_weight(l);
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) {
        w(r, c) = rng.uniform(-limit, limit);
      }
    }
  }
  return net;
}

Eigen::Index Mlp::weight_offset(int layer) const {
  return offsets_[static_cast<std::size_t>(layer)];
}

Eigen::Index Mlp::bias_offset(int layer) const {
  return weight_offset(layer) +
         static_cast<Eigen::Index>(widths_[layer]) * widths_[layer + 1];
}

Eigen::Map<const Matrix> Mlp::weight(int layer) const {
  return {params_.data() + weight_offset(layer), widths_[layer + 1],
          widths_[layer]};
}

Eigen::Map<Matrix> Mlp::mutable_weight(int layer) {
  return {params_.data() + weight_offset(layer), widths_[layer + 1],
          widths_[layer]};
}

Eigen::Map<const Vector> Mlp::bias(int layer) const {
  return {params_.data() + bias_offset(layer), widths_[layer + 1]};
}

Eigen::Map<Vector> Mlp::mutable_bias(int layer) {
  return {params_.data() + bias_offset(layer), widths_[layer + 1]};
}

Matrix mlp_forward(const Mlp& net, const Matrix& inputs, MlpTape* tape,
                   const DropoutSpec& dropout) {
  if (inputs.cols() != net.input_width()) {
    throw DimensionError("MLP input has " + std::to_string(inputs.cols()) +
                         " columns, expected " +
                         std::to_string(net.input_width()));
  }
  const bool use_dropout = dropout.rate > 0.0;
  if (use_dropout && (dropout.rate >= 1.0 || dropout.rng == nullptr)) {
    throw DimensionError("dropout needs 0 <= rate < 1 and an RNG");
  }
  if (tape != nullptr) {
    tape->inputs.clear();
    tape->pre_activations.clear();
    tape->masks.clear();
  }
  const double keep_scale = use_dropout ? 1.0 / (1.0 - dropout.rate) : 1.0;

  Matrix current = inputs;
  for (int l = 0; l < net.layer_count(); ++l) {
    Matrix z = current * net.weight(l).transpose();
    z.rowwise() += net.bias(l).transpose();
    if (!z.allFinite()) throw ModelError("non-finite activation", l);
    if (tape != nullptr) tape->inputs.push_back(std::move(current));
    if (l + 1 == net.layer_count()) return z;

    Matrix h = z;
    apply_activation(net.activation(l), h);
    if (tape != nullptr) tape->pre_activations.push_back(std::move(z));
    if (use_dropout) {
      Matrix mask(h.rows(), h.cols());
      for (Eigen::Index r = 0; r < mask.rows(); ++r) {
        for (Eigen::Index c = 0; c < mask.cols(); ++c) {
          mask(r, c) = dropout.rng->bernoulli(dropout.rate) ? 0.0 : keep_scale;
        }
      }
      h.array() *= mask.array();
      if (tape != nullptr) tape->masks.push_back(std::move(mask));
    }
    current = std::move(h);
  }
  return current;  // unreachable: layer_count() >= 1
}

void mlp_backward(const Mlp& net, const MlpTape& tape, const Matrix& upstream,
                  Eigen::Ref<Vector> grad) {
  if (grad.size() != static_cast<Eigen::Index>(net.parameter_count())) {
    throw DimensionError("gradient buffer does not match parameter count");
  }
  if (static_cast<int>(tape.inputs.size()) != net.layer_count()) {
    throw DimensionError("tape was not produced by this network");
  }
  if (upstream.cols() != net.output_width() ||
      upstream.rows() != tape.inputs.front().rows()) {
    throw DimensionError("upstream gradient has the wrong shape");
  }
  Matrix delta = upstream;
  for (int l = net.layer_count() - 1; l >= 0; --l) {
    const Matrix& input = tape.inputs[static_cast<std::size_t>(l)];
    Eigen::Map<Matrix> grad_w(grad.data() + net.weight_offset(l),
                              net.widths()[l + 1], net.widths()[l]);
    Eigen::Map<Vector> grad_b(grad.data() + net.bias_offset(l),
                              net.widths()[l + 1]);
    grad_w.noalias() += delta.transpose() * input;
    grad_b += delta.colwise().sum().transpose();
    if (l == 0) break;
    Matrix back = delta * net.weight(l);
    const auto hidden = static_cast<std::size_t>(l - 1);
    if (!tape.masks.empty()) back.array() *= tape.masks[hidden].array();
    apply_activation_grad(net.activation(l - 1), tape.pre_activations[hidden],
                          back);
    delta = std::move(back);
  }
}

MlpValueAndGrad mlp_value_and_grad(const Mlp& net, const Vector& x,
                                   const Vector& upstream) {
  if (upstream.size() != net.output_width()) {
    throw DimensionError("upstream length must equal the output width");
  }
  if (x.size() != net.input_width()) {
    throw DimensionError("input length must equal the input width");
  }
  MlpTape tape;
  const Matrix out = mlp_forward(net, x.transpose(), &tape);
  MlpValueAndGrad result;
  result.output = out.row(0).transpose();
  result.grad = Vector::Zero(static_cast<Eigen::Index>(net.parameter_count()));
  mlp_backward(net, tape, upstream.transpose(), result.grad);
  return result;
}

void to_json(nlohmann::json& j, const Mlp& net) {
  std::vector<std::string> acts;
  for (Activation a : net.activations()) acts.push_back(activation_name(a));
  j = nlohmann::json{
      {"widths", net.widths()},
      {"activations", acts},
      {"params", std::vector<double>(net.params().data(),
                                     net.params().data() + net.params().size())},
  };
}

void from_json(const nlohmann::json& j, Mlp& net) {
  std::vector<Activation> acts;
  for (const auto& name : j.at("activations")) {
    acts.push_back(activation_from_name(name.get<std::string>()));
  }
  Mlp loaded(j.at("widths").get<std::vector<int>>(), std::move(acts));
  const auto params = j.at("params").get<std::vector<double>>();
  if (params.size() != loaded.parameter_count()) {
    throw ParseError("MLP parameter count does not match its widths", 0);
  }
  loaded.mutable_params() =
      Eigen::Map<const Vector>(params.data(), static_cast<Eigen::Index>(params.size()));
  net = std::move(loaded);
}

}  // namespace tessera
