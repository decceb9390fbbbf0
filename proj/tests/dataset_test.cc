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

#include "tessera/dataset.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "gtest/gtest.h"
#include "tessera/error.h"

namespace tessera {
namespace {

std::string temp_path(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "tessera_dataset_test";
  std::filesystem::create_directories(dir);
  return (dir / name).string();
}

std::size_t count_of(const Dataset& ds, Split s) { return ds.rows(s).size(); }

TEST(GenHeteroscedastic, ConstantNoiseLevel) {
  NoiseProfile p = noise_profile_from_name("constant");
  p.level = 0.5;
  const Dataset ds = gen_heteroscedastic(100000, 3, p, 17);
  double sum = 0.0, sq = 0.0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    const double resid =
        ds.targets[r] - regression_function(ds.features.row(r).transpose());
    sum += resid;
    sq += resid * resid;
  }
  const double n = static_cast<double>(ds.size());
  const double sd = std::sqrt((sq - sum * sum / n) / (n - 1.0));
  EXPECT_GE(sd, 0.48);
  EXPECT_LE(sd, 0.52);
  EXPECT_EQ(ds.noise_std.minCoeff(), 0.5);
  EXPECT_EQ(ds.noise_std.maxCoeff(), 0.5);
}

TEST(GenHeteroscedastic, ZeroNoiseIsDeterministic) {
  NoiseProfile p = noise_profile_from_name("constant");
  p.level = 0.0;
  const Dataset a = gen_heteroscedastic(200, 2, p, 3);
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    EXPECT_EQ(a.targets[r], regression_function(a.features.row(r).transpose()));
  }
  EXPECT_TRUE(a == gen_heteroscedastic(200, 2, p, 3));
}

TEST(GenHeteroscedastic, SeedDeterminism) {
  const NoiseProfile p = noise_profile_from_name("step");
  EXPECT_TRUE(gen_heteroscedastic(500, 4, p, 9) ==
              gen_heteroscedastic(500, 4, p, 9));
  EXPECT_FALSE(gen_heteroscedastic(500, 4, p, 9) ==
               gen_heteroscedastic(500, 4, p, 10));
}

TEST(GenHeteroscedastic, Profiles) {
  const NoiseProfile step = noise_profile_from_name("step");
  const Dataset ds = gen_heteroscedastic(400, 2, step, 5);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    EXPECT_EQ(ds.noise_std[r], ds.features(r, 0) < 0.0 ? 0.2 : 1.0);
  }
  const NoiseProfile lin = noise_profile_from_name("linear");
  Vector x(2);
  x << 3.0, 4.0;
  EXPECT_DOUBLE_EQ(noise_std_at(lin, x), 0.1 + 0.3 * 5.0);
  EXPECT_THROW(noise_profile_from_name("cubic"), ConfigError);
  EXPECT_THROW(gen_heteroscedastic(0, 2, step, 1), ConfigError);
  EXPECT_THROW(gen_heteroscedastic(10, 0, step, 1), ConfigError);
}

TEST(SplitDataset, SixtyTwentyTenTen) {
  Dataset ds = gen_heteroscedastic(1000, 2, noise_profile_from_name("step"), 1);
  const Dataset split = split_dataset(
      ds, {.train = 0.6, .validation = 0.1, .calibration = 0.1, .test = 0.2},
      SplitMode::kRandom, 4);
  EXPECT_EQ(count_of(split, Split::kTrain), 600u);
  EXPECT_EQ(count_of(split, Split::kValidation), 100u);
  EXPECT_EQ(count_of(split, Split::kCalibration), 100u);
  EXPECT_EQ(count_of(split, Split::kTest), 200u);
  EXPECT_TRUE(split == split_dataset(ds, {}, SplitMode::kRandom, 4));
  EXPECT_FALSE(split.splits == split_dataset(ds, {}, SplitMode::kRandom, 5).splits);
}

TEST(SplitDataset, SizesPartitionAndRejectBadFractions) {
  for (std::size_t n : {1u, 7u, 13u, 99u, 1001u}) {
    const auto sizes = split_sizes(n, {});
    EXPECT_EQ(sizes[0] + sizes[1] + sizes[2] + sizes[3], n);
  }
  EXPECT_THROW(split_sizes(10, {.train = 0.7}), ConfigError);
  EXPECT_THROW(split_sizes(10, {.train = 0.8, .validation = -0.1}),
               ConfigError);
}

TEST(SplitDataset, ByGroupKeepsGroupsIntact) {
  Dataset ds = gen_heteroscedastic(600, 2, noise_profile_from_name("step"), 2);
  ds.groups.resize(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    ds.groups[i] = "g" + std::to_string((i * 7) % 37);
  }
  std::vector<std::string> warnings;
  const Dataset split =
      split_dataset(ds, {}, SplitMode::kByGroup, 3, &warnings);
  std::map<std::string, std::set<Split>> seen;
  for (std::size_t i = 0; i < split.size(); ++i) {
    seen[split.groups[i]].insert(split.splits[i]);
  }
  for (const auto& [group, splits] : seen) EXPECT_EQ(splits.size(), 1u) << group;
  EXPECT_NEAR(static_cast<double>(count_of(split, Split::kTrain)), 360.0, 17.0);
  EXPECT_NEAR(static_cast<double>(count_of(split, Split::kTest)), 120.0, 17.0);

  ds.groups.assign(ds.size(), "one");
  ds.groups[0] = "other";
  warnings.clear();
  split_dataset(ds, {}, SplitMode::kByGroup, 3, &warnings);
  EXPECT_FALSE(warnings.empty());

  ds.groups.clear();
  EXPECT_THROW(split_dataset(ds, {}, SplitMode::kByGroup, 3), ConfigError);
}

TEST(GenClusteredShift, OodTestIsHeldOut) {
  ClusterShiftConfig config;
  const Dataset ds = gen_clustered_shift(config, 11);
  std::set<std::string> test_groups, other_groups;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    (ds.splits[i] == Split::kTest ? test_groups : other_groups)
        .insert(ds.groups[i]);
  }
  EXPECT_EQ(test_groups, (std::set<std::string>{"cluster_0", "cluster_1"}));
  for (const std::string& g : test_groups) EXPECT_EQ(other_groups.count(g), 0u);
  EXPECT_TRUE(ds == gen_clustered_shift(config, 11));
}

TEST(GenClusteredShift, IidFractions) {
  ClusterShiftConfig config;
  config.n = 1000;
  config.mode = ShiftMode::kIid;
  const Dataset ds = gen_clustered_shift(config, 12);
  auto near = [](std::size_t got, double want) {
    return std::abs(static_cast<double>(got) - want) <= 1.0;
  };
  EXPECT_TRUE(near(count_of(ds, Split::kTrain), 600));
  EXPECT_TRUE(near(count_of(ds, Split::kValidation), 100));
  EXPECT_TRUE(near(count_of(ds, Split::kCalibration), 100));
  EXPECT_TRUE(near(count_of(ds, Split::kTest), 200));
}

TEST(GenClusteredShift, RejectsInfeasibleConfigs) {
  ClusterShiftConfig config;
  config.held_out = {};
  EXPECT_THROW(gen_clustered_shift(config, 1), ConfigError);
  config.held_out = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  EXPECT_THROW(gen_clustered_shift(config, 1), ConfigError);
  config.held_out = {12};
  EXPECT_THROW(gen_clustered_shift(config, 1), ConfigError);
  config.held_out = {0};
  config.n = 5;
  EXPECT_THROW(gen_clustered_shift(config, 1), ConfigError);
}

TEST(Csv, RoundTripIsLossless) {
  ClusterShiftConfig config;
  config.n = 300;
  const Dataset ds = gen_clustered_shift(config, 21);
  const std::string path = temp_path("round_trip.csv");
  save_csv(ds, path);
  EXPECT_TRUE(load_csv(path) == ds);

  const Dataset plain = gen_heteroscedastic(50, 3, noise_profile_from_name("linear"), 4);
  save_csv(plain, path);
  EXPECT_TRUE(load_csv(path) == plain);
}

TEST(Csv, GroupColumnPopulatesGroups) {
  const std::string path = temp_path("groups.csv");
  std::ofstream(path) << "feature_0,target,group\n1.5,2,a\n2.5,3,b\n";
  const Dataset ds = load_csv(path);
  EXPECT_EQ(ds.groups, (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(ds.dim(), 1);
  EXPECT_EQ(ds.targets[1], 3.0);
}

TEST(Csv, ErrorsNameTheLine) {
  const std::string path = temp_path("bad.csv");
  {
    std::ofstream out(path);
    out << "feature_0,feature_1,target\n";
    for (int i = 2; i < 17; ++i) out << i << ",0.5,1\n";
    out << "1,oops,2\n";
  }
  try {
    load_csv(path);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 17u);
  }
  std::ofstream(path) << "feature_0,target\n1,2\n3\n";
  try {
    load_csv(path);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  std::ofstream(path) << "feature_0,feature_1\n1,2\n";
  EXPECT_THROW(load_csv(path), ParseError);
  std::ofstream(path) << "";
  EXPECT_THROW(load_csv(path), ParseError);
}

}  // namespace
}  // namespace tessera
