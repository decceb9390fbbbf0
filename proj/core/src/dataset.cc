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

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "tessera/error.h"
#include "tessera/io.h"
#include "tessera/rng.h"

namespace tessera {
namespace {

constexpr std::array<Split, 4> kSplitOrder = {
    Split::kTrain, Split::kValidation, Split::kCalibration, Split::kTest};

std::array<double, 4> as_array(const SplitFractions& f) {
  return {f.train, f.validation, f.calibration, f.test};
}

void check_fractions(const SplitFractions& f) {
  const auto a = as_array(f);
  for (double x : a) {
    if (!(x >= 0.0)) throw ConfigError("split fractions must be >= 0");
  }
  const double sum = std::accumulate(a.begin(), a.end(), 0.0);
  if (std::abs(sum - 1.0) > 1e-9) {
    throw ConfigError("split fractions must sum to 1");
  }
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace

std::string split_name(Split s) {
  switch (s) {
    case Split::kTrain:
      return "train";
    case Split::kValidation:
      return "val";
    case Split::kCalibration:
      return "cal";
    case Split::kTest:
      return "test";
  }
  return "train";
}

Split split_from_name(const std::string& name) {
  for (Split s : kSplitOrder) {
    if (split_name(s) == name) return s;
  }
  throw ConfigError("unknown split tag '" + name + "'");
}

void Dataset::validate() const {
  const auto n = static_cast<Eigen::Index>(size());
  if (features.rows() != n) {
    throw DimensionError("feature rows do not match target count");
  }
  if (!groups.empty() && static_cast<Eigen::Index>(groups.size()) != n) {
    throw DimensionError("group labels do not match row count");
  }
  for (const std::string& g : groups) {
    if (g.empty()) throw DimensionError("group labels must be nonempty");
  }
  if (noise_std.size() != 0 && noise_std.size() != n) {
    throw DimensionError("noise_std does not match row count");
  }
  if (!splits.empty() && static_cast<Eigen::Index>(splits.size()) != n) {
    throw DimensionError("split tags do not match row count");
  }
}

std::vector<std::size_t> Dataset::rows(Split s) const {
  if (!has_splits()) throw ConfigError("dataset has no split assignment");
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < splits.size(); ++i) {
    if (splits[i] == s) out.push_back(i);
  }
  return out;
}

Matrix Dataset::features_of(Split s) const {
  return gather_rows(features, rows(s));
}

Vector Dataset::targets_of(Split s) const { return gather(targets, rows(s)); }

std::vector<std::string> Dataset::groups_of(Split s) const {
  std::vector<std::string> out;
  if (!has_groups()) return out;
  for (std::size_t i : rows(s)) out.push_back(groups[i]);
  return out;
}

Vector Dataset::noise_of(Split s) const {
  if (!has_noise()) return {};
  return gather(noise_std, rows(s));
}

bool operator==(const Dataset& a, const Dataset& b) {
  return a.features.rows() == b.features.rows() &&
         a.features.cols() == b.features.cols() && a.features == b.features &&
         a.targets.size() == b.targets.size() && a.targets == b.targets &&
         a.groups == b.groups && a.noise_std.size() == b.noise_std.size() &&
         a.noise_std == b.noise_std && a.splits == b.splits;
}

NoiseProfile noise_profile_from_name(const std::string& name) {
  NoiseProfile p;
  if (name == "constant") {
    p.kind = NoiseProfile::Kind::kConstant;
  } else if (name == "linear") {
    p.kind = NoiseProfile::Kind::kLinear;
  } else if (name == "step") {
    p.kind = NoiseProfile::Kind::kStep;
  } else {
    throw ConfigError("unknown noise profile '" + name + "'");
  }
  return p;
}

std::string noise_profile_name(NoiseProfile::Kind kind) {
  switch (kind) {
    case NoiseProfile::Kind::kConstant:
      return "constant";
    case NoiseProfile::Kind::kLinear:
      return "linear";
    case NoiseProfile::Kind::kStep:
      return "step";
  }
  return "constant";
}

double noise_std_at(const NoiseProfile& profile,
                    const Eigen::Ref<const Vector>& x) {
  switch (profile.kind) {
    case NoiseProfile::Kind::kConstant:
      return profile.level;
    case NoiseProfile::Kind::kLinear:
      return profile.base + profile.slope * x.norm();
    case NoiseProfile::Kind::kStep:
      return x[0] < profile.threshold ? profile.low : profile.high;
  }
  return profile.level;
}

double regression_function(const Eigen::Ref<const Vector>& x) {
  double f = std::sin(1.5 * x[0]) + 0.3 * x.sum();
  for (Eigen::Index j = 1; j < x.size(); ++j) {
    f += 0.5 * std::sin(x[j] + 0.5 * static_cast<double>(j));
  }
  return f;
}

Dataset gen_heteroscedastic(std::size_t n, int d, const NoiseProfile& profile,
                            std::uint64_t seed) {
  if (n < 1 || d < 1) throw ConfigError("generator needs n >= 1 and d >= 1");
  Rng rng = Rng(seed).child("heteroscedastic");
  Dataset ds;
  const auto rows = static_cast<Eigen::Index>(n);
  ds.features.resize(rows, d);
  ds.targets.resize(rows);
  ds.noise_std.resize(rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (int j = 0; j < d; ++j) ds.features(i, j) = rng.uniform(-2.0, 2.0);
    const Vector x = ds.features.row(i).transpose();
    const double sigma = noise_std_at(profile, x);
    if (!(sigma >= 0.0)) throw ConfigError("noise profile produced sigma < 0");
    ds.noise_std[i] = sigma;
    ds.targets[i] = regression_function(x) + sigma * rng.normal();
  }
  return ds;
}

std::vector<std::size_t> split_sizes(std::size_t n,
                                     const SplitFractions& fractions) {
  check_fractions(fractions);
  const auto f = as_array(fractions);
  std::vector<std::size_t> sizes(4);
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t s = 0; s < 4; ++s) {
    const double exact = f[s] * static_cast<double>(n);
    sizes[s] = static_cast<std::size_t>(std::floor(exact + 1e-9));
    assigned += sizes[s];
    remainders.emplace_back(exact - static_cast<double>(sizes[s]), s);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < n; ++i, ++assigned) {
    ++sizes[remainders[i % 4].second];
  }
  return sizes;
}

Dataset split_dataset(Dataset ds, const SplitFractions& fractions,
                      SplitMode mode, std::uint64_t seed,
                      std::vector<std::string>* warnings) {
  ds.validate();
  check_fractions(fractions);
  const std::size_t n = ds.size();
  ds.splits.assign(n, Split::kTrain);
  Rng rng = Rng(seed).child("split");

  if (mode == SplitMode::kRandom) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(order));
    const std::vector<std::size_t> sizes = split_sizes(n, fractions);
    std::size_t pos = 0;
    for (std::size_t s = 0; s < 4; ++s) {
      for (std::size_t k = 0; k < sizes[s]; ++k) {
        ds.splits[order[pos++]] = kSplitOrder[s];
      }
    }
    return ds;
  }

  if (!ds.has_groups()) {
    throw ConfigError("by-group splitting needs group labels");
  }
  std::map<std::string, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < n; ++i) members[ds.groups[i]].push_back(i);
  std::vector<const std::pair<const std::string, std::vector<std::size_t>>*>
      ordered;
  for (const auto& entry : members) ordered.push_back(&entry);
  std::stable_sort(ordered.begin(), ordered.end(), [](auto* a, auto* b) {
    return a->second.size() > b->second.size();
  });
  const auto f = as_array(fractions);
  std::array<double, 4> deficit;
  for (std::size_t s = 0; s < 4; ++s) deficit[s] = f[s] * static_cast<double>(n);
  for (const auto* group : ordered) {
    std::size_t best = 0;
    for (std::size_t s = 1; s < 4; ++s) {
      if (deficit[s] > deficit[best]) best = s;
    }
    const auto size = static_cast<double>(group->second.size());
    if (size > deficit[best] && warnings != nullptr) {
      warnings->push_back("group '" + group->first + "' (" +
                          std::to_string(group->second.size()) +
                          " rows) exceeds the remaining room in split '" +
                          split_name(kSplitOrder[best]) + "'");
    }
    for (std::size_t i : group->second) ds.splits[i] = kSplitOrder[best];
    deficit[best] -= size;
  }
  return ds;
}

Dataset gen_clustered_shift(const ClusterShiftConfig& config,
                            std::uint64_t seed) {
  const int k = config.clusters;
  if (config.d < 1 || k < 2) {
    throw ConfigError("clustered generator needs d >= 1 and >= 2 clusters");
  }
  if (config.n < static_cast<std::size_t>(k)) {
    throw ConfigError("fewer rows than clusters");
  }
  std::vector<bool> held(static_cast<std::size_t>(k), false);
  for (int c : config.held_out) {
    if (c < 0 || c >= k) throw ConfigError("held-out cluster out of range");
    held[static_cast<std::size_t>(c)] = true;
  }
  const auto held_count = std::count(held.begin(), held.end(), true);
  if (held_count == 0 || held_count == k) {
    throw ConfigError("held-out clusters must be a nonempty proper subset");
  }
  check_fractions(config.fractions);

  Rng root(seed);
  Rng center_rng = root.child("centers");
  Matrix centers(k, config.d);
  for (int c = 0; c < k; ++c) {
    Vector v(config.d);
    for (int j = 0; j < config.d; ++j) v[j] = center_rng.normal();
    if (held[static_cast<std::size_t>(c)]) {
      v *= config.held_out_radius / std::max(v.norm(), 1e-12);
    } else {
      v *= config.center_scale;
    }
    centers.row(c) = v.transpose();
  }

  Rng point_rng = root.child("points");
  Dataset ds;
  const auto rows = static_cast<Eigen::Index>(config.n);
  ds.features.resize(rows, config.d);
  ds.targets.resize(rows);
  ds.noise_std = Vector::Constant(rows, config.noise);
  ds.groups.resize(config.n);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto c = static_cast<int>(i % k);
    for (int j = 0; j < config.d; ++j) {
      ds.features(i, j) = centers(c, j) + config.cluster_spread * point_rng.normal();
    }
    ds.targets[i] = regression_function(ds.features.row(i).transpose()) +
                    config.noise * point_rng.normal();
    ds.groups[static_cast<std::size_t>(i)] = "cluster_" + std::to_string(c);
  }

  const std::uint64_t split_seed = root.child("assign").seed();
  if (config.mode == ShiftMode::kIid) {
    return split_dataset(std::move(ds), config.fractions, SplitMode::kRandom,
                         split_seed);
  }

  // OOD: carve TRAIN/VAL/CAL from in-distribution rows, TEST = held-out.
  std::vector<std::size_t> in_dist;
  ds.splits.assign(config.n, Split::kTest);
  for (std::size_t i = 0; i < config.n; ++i) {
    if (!held[i % static_cast<std::size_t>(k)]) in_dist.push_back(i);
  }
  Rng split_rng = Rng(split_seed).child("split");
  split_rng.shuffle(std::span<std::size_t>(in_dist));
  const double in_total = config.fractions.train +
                          config.fractions.validation +
                          config.fractions.calibration;
  if (!(in_total > 0.0)) throw ConfigError("no room for training rows");
  const SplitFractions renorm{config.fractions.train / in_total,
                              config.fractions.validation / in_total,
                              1.0 - (config.fractions.train +
                                     config.fractions.validation) /
                                        in_total,
                              0.0};
  const std::vector<std::size_t> sizes = split_sizes(in_dist.size(), renorm);
  std::size_t pos = 0;
  for (std::size_t s = 0; s < 3; ++s) {
    for (std::size_t m = 0; m < sizes[s]; ++m) {
      ds.splits[in_dist[pos++]] = kSplitOrder[s];
    }
  }
  return ds;
}

void save_csv(const Dataset& ds, const std::string& path) {
  ds.validate();
  std::ostringstream out;
  for (int j = 0; j < ds.dim(); ++j) out << "feature_" << j << ',';
  out << "target";
  if (ds.has_groups()) out << ",group";
  if (ds.has_splits()) out << ",split";
  if (ds.has_noise()) out << ",noise_std";
  out << '\n';
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    for (int j = 0; j < ds.dim(); ++j) {
      out << format_double(ds.features(r, j)) << ',';
    }
    out << format_double(ds.targets[r]);
    if (ds.has_groups()) {
      if (ds.groups[i].find_first_of(",\"\r\n") != std::string::npos) {
        throw ConfigError("group label '" + ds.groups[i] +
                          "' cannot be written to CSV");
      }
      out << ',' << ds.groups[i];
    }
    if (ds.has_splits()) out << ',' << split_name(ds.splits[i]);
    if (ds.has_noise()) out << ',' << format_double(ds.noise_std[r]);
    out << '\n';
  }
  write_text_file(path, out.str());
}

Dataset load_csv(const std::string& path) {
  std::istringstream in(read_text_file(path));
  std::string line;
  if (!std::getline(in, line)) throw ParseError("missing header row", 1);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::vector<std::string> header = split_fields(line);

  int features = 0;
  int target_col = -1, group_col = -1, split_col = -1, noise_col = -1;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const std::string& h = header[c];
    const int col = static_cast<int>(c);
    if (h == "feature_" + std::to_string(features) &&
        col == features) {
      ++features;
    } else if (h == "target" && target_col < 0) {
      target_col = col;
    } else if (h == "group" && group_col < 0) {
      group_col = col;
    } else if (h == "split" && split_col < 0) {
      split_col = col;
    } else if (h == "noise_std" && noise_col < 0) {
      noise_col = col;
    } else {
      throw ParseError("unexpected header column '" + h + "'", 1);
    }
  }
  if (target_col < 0) throw ParseError("missing target column", 1);
  if (features == 0) throw ParseError("no feature_<j> columns", 1);

  std::vector<std::vector<double>> feature_rows;
  std::vector<double> targets, noise;
  Dataset ds;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> fields = split_fields(line);
    if (fields.size() != header.size()) {
      throw ParseError("expected " + std::to_string(header.size()) +
                           " fields, found " + std::to_string(fields.size()),
                       line_no);
    }
    auto number = [&](int col) {
      double v = 0.0;
      if (!parse_double(fields[static_cast<std::size_t>(col)], v)) {
        throw ParseError("non-numeric value '" +
                             fields[static_cast<std::size_t>(col)] +
                             "' in column '" +
                             header[static_cast<std::size_t>(col)] + "'",
                         line_no);
      }
      return v;
    };
    std::vector<double> row(static_cast<std::size_t>(features));
    for (int j = 0; j < features; ++j) row[static_cast<std::size_t>(j)] = number(j);
    feature_rows.push_back(std::move(row));
    targets.push_back(number(target_col));
    if (group_col >= 0) {
      const std::string& g = fields[static_cast<std::size_t>(group_col)];
      if (g.empty()) throw ParseError("empty group label", line_no);
      ds.groups.push_back(g);
    }
    if (split_col >= 0) {
      try {
        ds.splits.push_back(
            split_from_name(fields[static_cast<std::size_t>(split_col)]));
      } catch (const ConfigError& e) {
        throw ParseError(e.what(), line_no);
      }
    }
    if (noise_col >= 0) noise.push_back(number(noise_col));
  }

  const auto n = static_cast<Eigen::Index>(targets.size());
  ds.features.resize(n, features);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int j = 0; j < features; ++j) {
      ds.features(i, j) =
          feature_rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
  }
  ds.targets = Eigen::Map<const Vector>(targets.data(), n);
  if (noise_col >= 0) ds.noise_std = Eigen::Map<const Vector>(noise.data(), n);
  return ds;
}

}  // namespace tessera
