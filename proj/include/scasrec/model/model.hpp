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
#include <filesystem>
#include <span>
#include <vector>

#include "scasrec/diff/graph.hpp"
#include "scasrec/features/features.hpp"
#include "scasrec/rng.hpp"

namespace scasrec::model {

struct ModelConfig {
  features::FeatureConfig features;
  std::size_t head_hidden = 32;
  std::size_t max_steps = 10;  // T_max is min(N, max_steps)
  bool keep_start = true;      // start vector stays in the selected representation after t = 1
  bool use_eor = true;         // false: EOR is masked at every step (ablation)

  void validate() const;
};

/// Shared two-layer transform whose hidden units are scaled and shifted by a
/// hypernetwork of the scene vector.
struct SceneBlockParams {
  int w1 = -1, b1 = -1, w2 = -1, b2 = -1;
  int gamma_w = -1, gamma_b = -1, beta_w = -1, beta_b = -1;
};

struct ModelParams {
  int enc_wq = -1, enc_wk = -1, enc_wv = -1;
  SceneBlockParams enc_block;
  int eor = -1, start = -1;
  int dec_wq = -1, dec_wk = -1, dec_wv = -1;
  int head_w_enc = -1, head_w_dec = -1, head_b1 = -1, head_w2 = -1;
  int head_gamma_w = -1, head_gamma_b = -1, head_beta_w = -1, head_beta_b = -1;

  static ModelParams bind(const diff::ParamStore& store);
};

struct Model {
  ModelConfig config;
  world::FeatureWidths widths;
  features::NormStats stats;
  diff::ParamStore params;
  features::FeatureParams fp;
  ModelParams mp;
};

/// Fresh parameters drawn from `seed`. Normalization stats are left empty.
Model make_model(const ModelConfig& config, const world::FeatureWidths& widths, std::uint64_t seed);

void save_model(const std::filesystem::path& path, const Model& model, bool with_optimizer,
                const std::vector<diff::NamedTensor>& extra = {});
/// Rebuilds the model from a checkpoint; `extra` receives every entry.
Model load_model(const std::filesystem::path& path, std::vector<diff::NamedTensor>* entries = nullptr);

/// x + modulated FFN(x): output has the shape of x.
diff::Var scene_block(diff::Graph& graph, diff::ParamStore& store, const SceneBlockParams& p, diff::Var x,
                      diff::Var scene);

struct EncoderState {
  std::size_t n = 0;    // candidates; EOR sits at row n
  diff::Var s_en;       // (N+1) x F, EOR appended
  diff::Var x_de;       // (N+1) x F, decoder candidate set
  diff::Var query;      // x_de W^Q, constant across steps
  diff::Var head_base;  // s_en part of the head's first layer
  diff::Var gamma, beta;  // head modulation from the scene
};

EncoderState encode(diff::Graph& graph, Model& model, const features::Representation& rep);

/// Sigmoid-gated attention of every decoder candidate over the selected rows.
diff::Var state_attention(diff::Graph& graph, Model& model, diff::Var x_de, diff::Var selected);
// Variant taking a precomputed x_de W^Q.
diff::Var state_attention_q(diff::Graph& graph, Model& model, diff::Var query, diff::Var selected);

/// Rows of the selected representation at the next step: start vector (when
/// kept or when nothing is selected) followed by the selected items.
diff::Var selected_rows(diff::Graph& graph, Model& model, const EncoderState& enc, std::span<const int> selected);

/// P_t as a 1 x (N+1) probability row; EOR is the last entry.
diff::Var decode_step(diff::Graph& graph, Model& model, const EncoderState& enc, std::span<const int> selected);

inline constexpr int kNoStep = -1;

struct DecodeState {
  std::vector<int> selected;
  int t = 1;                 // next step to run
  int t_hat = kNoStep;       // step at which the ground truth was appended
  bool stopped_by_eor = false;
  std::vector<std::vector<double>> probs;  // P_t per executed step
  std::vector<int> actions;                // sampled/argmax index per step (EOR = n)
  std::vector<double> log_probs;           // log P_t[action]
  std::vector<diff::Var> prob_vars;        // graph handles of P_t
};

std::size_t step_limit(const Model& model, std::size_t n);

/// Full-argmax decoding (ties to the lowest index); stops when EOR wins.
DecodeState greedy_decode(diff::Graph& graph, Model& model, const EncoderState& enc, int gt_index = -1);

/// Samples each action from P_t; stops on a sampled EOR or at T_max.
DecodeState sample_decode(diff::Graph& graph, Model& model, const EncoderState& enc, Rng& rng, int gt_index = -1);

/// Index of the largest entry; lowest index on ties. `skip_last` excludes EOR.
std::size_t argmax(std::span<const double> p, bool skip_last = false);

/// Convenience: assemble + encode + greedy decode with a value-only graph.
DecodeState infer(diff::Graph& graph, Model& model, const world::Sample& sample);

}  // namespace scasrec::model
