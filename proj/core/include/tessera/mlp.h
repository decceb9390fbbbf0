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

#ifndef TESSERA_MLP_H_
#define TESSERA_MLP_H_

#include <nlohmann/json.hpp>
#include <span>
#include <string>
#include <vector>

#include "tessera/numerics.h"
#include "tessera/rng.h"

namespace tessera {

enum class Activation { kIdentity, kTanh, kRelu };

std::string activation_name(Activation a);
Activation activation_from_name(const std::string& name);

// Fully connected feed-forward network with a fixed topology.
//
// All parameters live in one flat vector so that optimizers and gradient
// checks work on a single buffer. Layer l (0-based) maps width[l] inputs to
// width[l+1] outputs; its weight block is stored row-major (out x in) and is
// followed by its bias. Hidden layers apply `activation(l)`; the output
// layer is always linear.
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::vector<int> widths, std::vector<Activation> hidden_activations);

  // Xavier-uniform weights, zero biases.
  static Mlp xavier(std::vector<int> widths,
                    std::vector<Activation> hidden_activations, Rng& rng);

  int input_width() const { return widths_.front(); }
  int output_width() const { return widths_.back(); }
  int layer_count() const { return static_cast<int>(widths_.size()) - 1; }
  const std::vector<int>& widths() const { return widths_; }
  Activation activation(int hidden_layer) const {
    return activations_[static_cast<std::size_t>(hidden_layer)];
  }
  const std::vector<Activation>& activations() const { return activations_; }

  std::size_t parameter_count() const {
    return static_cast<std::size_t>(params_.size());
  }
  const Vector& params() const { return params_; }
  Vector& mutable_params() { return params_; }

  Eigen::Map<const Matrix> weight(int layer) const;
  Eigen::Map<Matrix> mutable_weight(int layer);
  Eigen::Map<const Vector> bias(int layer) const;
  Eigen::Map<Vector> mutable_bias(int layer);

  // Offsets of layer blocks inside params().
  Eigen::Index weight_offset(int layer) const;
  Eigen::Index bias_offset(int layer) const;

 private:
  std::vector<int> widths_;
  std::vector<Activation> activations_;
  std::vector<Eigen::Index> offsets_;
  Vector params_;
};

// Intermediate values kept by the forward pass for backpropagation.
struct MlpTape {
  // inputs[l] is the (possibly dropped-out) input to layer l.
  std::vector<Matrix> inputs;
  // Hidden pre-activations, one per hidden layer.
  std::vector<Matrix> pre_activations;
  // Inverted-dropout masks (0 or 1/(1-rate)) per hidden layer; empty when
  // dropout is off.
  std::vector<Matrix> masks;
};

// Inverted dropout on hidden-layer outputs. rate = 0 disables it.
struct DropoutSpec {
  double rate = 0.0;
  Rng* rng = nullptr;
};

// Forward pass over a batch (one sample per row). Throws DimensionError on
// a width mismatch and ModelError if a layer produces non-finite values.
Matrix mlp_forward(const Mlp& net, const Matrix& inputs,
                   MlpTape* tape = nullptr, const DropoutSpec& dropout = {});

// Adds d<upstream, output>/d params into `grad` (length parameter_count()).
// `tape` must come from mlp_forward on the same net.
void mlp_backward(const Mlp& net, const MlpTape& tape, const Matrix& upstream,
                  Eigen::Ref<Vector> grad);

struct MlpValueAndGrad {
  Vector output;
  Vector grad;
};

// Single-sample convenience: output and gradient of <upstream, output>.
MlpValueAndGrad mlp_value_and_grad(const Mlp& net, const Vector& x,
                                   const Vector& upstream);

void to_json(nlohmann::json& j, const Mlp& net);
void from_json(const nlohmann::json& j, Mlp& net);

}  // namespace tessera

#endif  // TESSERA_MLP_H_
