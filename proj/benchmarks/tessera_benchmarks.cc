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

#include <cstdint>
#include <vector>

#include "benchmark/benchmark.h"
#include "tessera/conformal.h"
#include "tessera/metrics.h"
#include "tessera/moe.h"
#include "tessera/rng.h"
#include "tessera/stats.h"

namespace tessera {
namespace {

std::vector<double> normals(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal();
  return v;
}

struct MoeFixture {
  MoeModel model;
  Matrix x;
  Vector y;

  explicit MoeFixture(Eigen::Index rows) {
    Rng rng(1);
    model = MoeModel::initialize(
        {.input_dim = 8, .num_experts = 4, .expert_hidden = 32}, rng);
    x.resize(rows, 8);
    y.resize(rows);
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (int j = 0; j < 8; ++j) x(i, j) = rng.normal();
      y(i) = rng.normal();
    }
  }
};

void BM_MoeForward(benchmark::State& state) {
  const MoeFixture f(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(moe_forward_batch(f.model, f.x));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_MoeForward)->Arg(64)->Arg(1024);

void BM_MixtureNllGrad(benchmark::State& state) {
  const MoeFixture f(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(mixture_nll(f.model, f.x, f.y, true));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_MixtureNllGrad)->Arg(64)->Arg(1024);

void BM_ConformalQuantile(benchmark::State& state) {
  std::vector<double> scores = normals(static_cast<std::size_t>(state.range(0)), 2);
  for (double& s : scores) s = std::abs(s);
  for (auto _ : state) {
    benchmark::DoNotOptimize(conformal_quantile(scores, 0.1));
  }
}
BENCHMARK(BM_ConformalQuantile)->Arg(1000)->Arg(100000);

void BM_KendallTau(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const std::vector<double> a = normals(n, 3), b = normals(n, 4);
  for (auto _ : state) benchmark::DoNotOptimize(kendall_tau_b(a, b));
}
BENCHMARK(BM_KendallTau)->Arg(1000)->Arg(100000);

void BM_Sparsification(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const std::vector<double> err = normals(n, 5), unc = normals(n, 6);
  const std::vector<double> grid = default_sparsification_grid();
  for (auto _ : state) {
    benchmark::DoNotOptimize(sparsification(unc, err, grid));
  }
}
BENCHMARK(BM_Sparsification)->Arg(2000)->Arg(100000);

}  // namespace
}  // namespace tessera

BENCHMARK_MAIN();
