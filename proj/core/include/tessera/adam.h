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

#ifndef TESSERA_ADAM_H_
#define TESSERA_ADAM_H_

#include <cstdint>

#include "tessera/numerics.h"

namespace tessera {

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class AdamState {
 public:
  AdamState(Eigen::Index parameter_count, AdamConfig config = {});

  const AdamConfig& config() const { return config_; }
  std::int64_t step_count() const { return step_; }
  const Vector& first_moment() const { return m_; }
  const Vector& second_moment() const { return v_; }

 private:
  friend void adam_step(AdamState&, Eigen::Ref<Vector>,
                        const Eigen::Ref<const Vector>&);
  AdamConfig config_;
  Vector m_;
  Vector v_;
  std::int64_t step_ = 0;
};

// One bias-corrected Adam update of `params` in place. Throws TrainingError
// (carrying the 1-based step index) on a non-finite gradient, leaving both
// params and state untouched.
void adam_step(AdamState& state, Eigen::Ref<Vector> params,
               const Eigen::Ref<const Vector>& grads);

}  // namespace tessera

#endif  // TESSERA_ADAM_H_
