// Copyright 2026 The SCASRec Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "scasrec/world/routeworld.hpp"

namespace scasrec::world {

inline constexpr int kSchemaVersion = 1;

struct Sample {
  std::int64_t sample_id = 0;
  std::vector<Route> candidates;
  std::vector<double> scene;
  std::vector<std::vector<double>> history;
  std::vector<int> trajectory;  // sorted edge ids
  std::vector<double> cr;
  int gt_index = 0;
  bool is_noisy = false;  // evaluation-only

  std::size_t size() const noexcept { return candidates.size(); }
  double gt_cr() const { return cr.at(static_cast<std::size_t>(gt_index)); }

  friend bool operator==(const Sample&, const Sample&) = default;
};

struct FeatureWidths {
  std::size_t route = 62;
  std::size_t scene = 10;
  std::size_t history = 31;  // selected-route prefix + scene

  friend bool operator==(const FeatureWidths&, const FeatureWidths&) = default;
};

struct WorldConfig {
  int grid_width = 12;
  int grid_height = 12;
  int max_candidates = 10;
  int history_length = 8;
  int users = 400;
  FeatureWidths widths;
  double deviation = 0.1;
  double noise = 0.0;         // misclick ratio injected after generation
  double choice_noise = 1.0;  // Gumbel scale of the user choice model
  std::uint64_t seed = 1;

  void validate() const;
};

// Cardinality of the discrete request-time bucket stored in scene[0] (ids 1..6).
inline constexpr int kTimeBuckets = 6;

/// Recomputes cr and gt_index (argmax, lowest index on ties) from the trajectory.
void label_coverage(Sample& sample);

/// Generates samples with ids [first_id, first_id + count). Every sample is a
/// pure function of (config, id), so disjoint id ranges give disjoint
/// train/test splits over the same world and user population.
std::vector<Sample> generate_dataset(const WorldConfig& config, std::int64_t first_id, std::size_t count);

/// Replaces the trajectory of a Bernoulli(beta_true) subset of samples with a
/// random non-ground-truth candidate's edge set and relabels them.
void inject_noise(std::vector<Sample>& samples, double beta_true, std::uint64_t seed);

std::string sample_to_json_line(const Sample& sample);
Sample sample_from_json_line(const std::string& line, std::size_t line_number);

void write_dataset(const std::vector<Sample>& samples, const std::filesystem::path& path);
std::vector<Sample> read_dataset(const std::filesystem::path& path);

}  // namespace scasrec::world
