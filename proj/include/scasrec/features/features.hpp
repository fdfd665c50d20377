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

#include <cstddef>
#include <optional>
#include <vector>

#include "scasrec/diff/checkpoint.hpp"
#include "scasrec/diff/graph.hpp"
#include "scasrec/rng.hpp"
#include "scasrec/world/dataset.hpp"

namespace scasrec::features {

inline constexpr double kStdFloor = 1e-6;

/// Per-dimension z-score statistics for the route, scene and history blocks,
/// fitted once on the training split.
struct NormStats {
  world::FeatureWidths widths;
  std::vector<double> mean;  // route | scene | history
  std::vector<double> std;

  bool fitted() const noexcept { return !mean.empty(); }
  std::size_t scene_offset() const noexcept { return widths.route; }
  std::size_t history_offset() const noexcept { return widths.route + widths.scene; }

  // Serialized as "norm.mean" and "norm.std".
  std::vector<diff::NamedTensor> to_tensors() const;
  static NormStats from_tensors(const std::vector<diff::NamedTensor>& tensors, const world::FeatureWidths& widths);

  friend bool operator==(const NormStats&, const NormStats&) = default;
};

/// Population mean/std over every candidate route, scene vector and history
/// record in `train`.
NormStats fit_zscore(const std::vector<world::Sample>& train);

struct FeatureConfig {
  std::size_t model_width = 32;  // F
  std::size_t history_width = 16;
  std::size_t din_hidden = 16;
  std::size_t scene_width = 8;
  std::size_t time_embedding = 4;
  bool softmax_history = false;  // normalize history scores instead of sigmoid gates

  void validate() const;
};

/// Indices of the feature-pipeline parameters inside a ParamStore.
struct FeatureParams {
  int time_table = -1;
  int scene_w = -1, scene_b = -1;
  int hist_w = -1, hist_b = -1;
  int target_w = -1, target_b = -1;
  int din_w1 = -1, din_b1 = -1, din_w2 = -1, din_b2 = -1;
  int route_proj_w = -1, route_proj_b = -1;
  int hist_proj_w = -1, hist_proj_b = -1;

  static FeatureParams bind(const diff::ParamStore& store);
};

FeatureParams init_feature_params(diff::ParamStore& store, const FeatureConfig& config,
                                  const world::FeatureWidths& widths, Rng& rng);

/// Normalized, graph-independent inputs of one sample. Cheap to cache.
struct SampleInputs {
  diff::Tensor route;        // N x route width
  diff::Tensor scene;        // 1 x (scene width - 1): continuous scene slots
  int time_bucket = 0;       // scene[0]
  std::optional<diff::Tensor> history;  // M x history width, absent when M = 0
};

SampleInputs prepare_inputs(const world::Sample& sample, const NormStats& stats);

/// Row lookup into a learnable table; ids outside [0, rows) map to row 0.
diff::Var embed_discrete(diff::Graph& graph, diff::ParamStore& store, int table, int id);

/// Target attention of each candidate over the user's history records.
/// Returns N x history_width; all zeros when there is no history.
diff::Var history_attention(diff::Graph& graph, diff::ParamStore& store, const FeatureParams& p,
                            const FeatureConfig& config, diff::Var route, diff::Var scene,
                            const std::optional<diff::Tensor>& history);

struct Representation {
  diff::Var x_en;   // N x F
  diff::Var scene;  // 1 x scene_width
};

Representation assemble(diff::Graph& graph, diff::ParamStore& store, const FeatureParams& p,
                        const FeatureConfig& config, const SampleInputs& inputs);

// Uniform Glorot initialization.
diff::Tensor glorot(std::size_t rows, std::size_t cols, Rng& rng);

}  // namespace scasrec::features
