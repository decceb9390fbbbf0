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

#include "tessera/error.h"

namespace tessera {

AdamState::AdamState(Eigen::Index parameter_count, AdamConfig config)
    : config_(config),
      m_(Vector::Zero(parameter_count)),
      v_(Vector::Zero(parameter_count)) {}

void adam_step(AdamState& state, Eigen::Ref<Vector> params,
               const Eigen::Ref<const Vector>& grads) {
  if (params.size() != state.m_.size() || grads.size() != state.m_.size()) {
    throw DimensionError("Adam parameter/gradient sizes do not match state");
  }
  if (!grads.allFinite()) {
    throw TrainingError("non-finite gradient", state.step_ + 1);
  }
  const AdamConfig& c = state.config_;
  ++state.step_;
  state.m_ = c.beta1 * state.m_ + (1.0 - c.beta1) * grads;
  state.v_ = c.beta2 * state.v_ + (1.0 - c.beta2) * grads.cwiseProduct(grads);
  const double t = static_cast<double>(state.step_);
  const double m_correction = 1.0 - std::pow(c.beta1, t);
  const double v_correction = 1.0 - std::pow(c.beta2, t);
  params.array() -= c.learning_rate * (state.m_.array() / m_correction) /
                    ((state.v_.array() / v_correction).sqrt() + c.epsilon);
}

}  // namespace tessera
