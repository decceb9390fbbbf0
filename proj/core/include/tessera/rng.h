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

#ifndef TESSERA_RNG_H_
#define TESSERA_RNG_H_

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <utility>

namespace tessera {

// Seeded pseudo-random stream.
//
// Child streams are derived from the seed only (never from the current
// engine state), so `rng.child("init")` is the same stream no matter how many
// values were drawn from `rng` beforehand. The value conversions (uniform,
// normal) are implemented here rather than through <random> distributions so
// that streams are identical across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  Rng child(std::string_view name) const;
  Rng child(std::uint64_t index) const;

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() { return engine_(); }
  // Uniform on [0, 1) with 53 bits of resolution.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Standard normal via Box-Muller; one value per call.
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }
  bool bernoulli(double p) { return uniform() < p; }
  // Uniform on {0, ..., n-1}; n must be positive.
  std::size_t uniform_index(std::size_t n);

  template <typename T>
  void shuffle(std::span<T> values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      std::swap(values[i - 1], values[uniform_index(i)]);
    }
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

// SplitMix64 finalizer; used for seed derivation and hashing.
std::uint64_t mix64(std::uint64_t x);

// FNV-1a over bytes, 64-bit.
std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace tessera

#endif  // TESSERA_RNG_H_
