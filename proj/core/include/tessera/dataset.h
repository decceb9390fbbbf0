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

#ifndef TESSERA_DATASET_H_
#define TESSERA_DATASET_H_

#include <cstdint>
#include <string>
#include <vector>

#include "tessera/numerics.h"

namespace tessera {

enum class Split : std::uint8_t { kTrain, kValidation, kCalibration, kTest };

std::string split_name(Split s);  // train | val | cal | test
Split split_from_name(const std::string& name);

// Features, targets and optional per-row annotations. Optional columns are
// either empty or have one entry per row.
struct Dataset {
  Matrix features;                  // n x d
  Vector targets;                   // n
  std::vector<std::string> groups;  // group label per row
  Vector noise_std;                 // ground-truth noise scale (synthetic)
  std::vector<Split> splits;

  std::size_t size() const { return static_cast<std::size_t>(targets.size()); }
  int dim() const { return static_cast<int>(features.cols()); }
  bool has_groups() const { return !groups.empty(); }
  bool has_noise() const { return noise_std.size() > 0; }
  bool has_splits() const { return !splits.empty(); }

  // Throws DimensionError on inconsistent lengths or empty group labels.
  void validate() const;

  std::vector<std::size_t> rows(Split s) const;
  Matrix features_of(Split s) const;
  Vector targets_of(Split s) const;
  std::vector<std::string> groups_of(Split s) const;
  Vector noise_of(Split s) const;
};

bool operator==(const Dataset& a, const Dataset& b);

// Noise scale sigma(x) of the heteroscedastic generator.
struct NoiseProfile {
  enum class Kind { kConstant, kLinear, kStep };
  Kind kind = Kind::kConstant;
  double level = 0.5;      // constant: sigma
  double base = 0.1;       // linear: base + slope * |x|_2
  double slope = 0.3;
  double low = 0.2;        // step: low if x_0 < threshold, else high
  double high = 1.0;
  double threshold = 0.0;
};

// "constant" | "linear" | "step" with default parameters; throws ConfigError
// for any other name.
NoiseProfile noise_profile_from_name(const std::string& name);
std::string noise_profile_name(NoiseProfile::Kind kind);

double noise_std_at(const NoiseProfile& profile,
                    const Eigen::Ref<const Vector>& x);

// Smooth ground-truth regression function shared by the generators.
double regression_function(const Eigen::Ref<const Vector>& x);

// x ~ U(-2, 2)^d, y = f(x) + sigma(x) * N(0, 1). No split tags.
Dataset gen_heteroscedastic(std::size_t n, int d, const NoiseProfile& profile,
                            std::uint64_t seed);

struct SplitFractions {
  double train = 0.6;
  double validation = 0.1;
  double calibration = 0.1;
  double test = 0.2;
};

enum class ShiftMode { kOod, kIid };

struct ClusterShiftConfig {
  std::size_t n = 5000;
  int d = 4;
  int clusters = 10;
  std::vector<int> held_out = {0, 1};
  double center_scale = 1.0;    // in-distribution centers ~ N(0, scale^2 I)
  double held_out_radius = 5.0; // held-out centers lie at this distance
  double cluster_spread = 0.4;
  double noise = 0.2;
  ShiftMode mode = ShiftMode::kOod;
  SplitFractions fractions;
};

// Gaussian clusters, one group label ("cluster_<i>") each; rows are dealt to
// clusters round-robin. In OOD mode TEST is exactly the held-out clusters and
// the remaining rows are split randomly among TRAIN/VAL/CAL in proportion to
// the fractions; in IID mode all rows are split randomly.
Dataset gen_clustered_shift(const ClusterShiftConfig& config,
                            std::uint64_t seed);

enum class SplitMode { kRandom, kByGroup };

// Assigns split tags. Random mode shuffles rows and cuts sizes by largest
// remainder; by-group mode deals whole groups, largest first, to the split
// with the largest remaining deficit. Oversized groups are still assigned
// and reported through `warnings` when given.
Dataset split_dataset(Dataset ds, const SplitFractions& fractions,
                      SplitMode mode, std::uint64_t seed,
                      std::vector<std::string>* warnings = nullptr);

// Sizes that sum to n, proportional to the fractions (largest remainder).
std::vector<std::size_t> split_sizes(std::size_t n,
                                     const SplitFractions& fractions);

// Columns: feature_0..feature_{d-1}, target, then optional group, split and
// noise_std. Values are written in shortest round-trip form.
void save_csv(const Dataset& ds, const std::string& path);
// Throws ParseError naming the offending 1-based line.
Dataset load_csv(const std::string& path);

}  // namespace tessera

#endif  // TESSERA_DATASET_H_
