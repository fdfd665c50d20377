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
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "scasrec/diff/graph.hpp"
#include "scasrec/features/features.hpp"
#include "scasrec/model/model.hpp"
#include "scasrec/rewards/rewards.hpp"
#include "scasrec/world/dataset.hpp"

namespace scasrec::trainer {

struct LossFlags {
  bool disable_scr = false;       // gt-step weight is 1 instead of the SCR gap
  bool scr_after_append = false;  // LCR includes the item appended at step t
  double reward_floor = 0.0;      // lower bound on gt-step weights; 0 = off
  bool loss_sum = false;          // literal sum over the batch instead of the mean
};

struct TrainConfig {
  model::ModelConfig model;
  std::size_t batch_size = 128;
  double learning_rate = 1e-3;
  std::size_t epochs = 2;
  double alpha = 0.1;
  double eta = 1e-4;
  double beta = 0.04;
  double lambda = 0.5;  // RL discount
  bool rl = false;
  bool rl_baseline = false;  // subtract the batch-mean return
  LossFlags flags;
  std::size_t eval_every = 0;  // batches between evaluations; 0 = end of each epoch only
  std::uint64_t seed = 1;

  void validate() const;
};

/// One prepared training example.
struct Example {
  const world::Sample* sample = nullptr;
  features::SampleInputs inputs;
};

std::vector<Example> prepare_examples(const std::vector<world::Sample>& samples, const features::NormStats& stats);

/// Everything the supervised decode did for one sample of a batch.
struct SampleTrace {
  std::vector<int> appended;   // items appended to the list, in order
  std::vector<int> labels;     // Y_t per loss step
  std::vector<double> weights; // r_t per loss step
  std::vector<double> label_probs;  // P_t[Y_t]
  std::vector<std::vector<double>> probs;
  int t_hat = model::kNoStep;
  bool failed = false;
  double loss = 0.0;           // -sum r_t log P_t[Y_t], unscaled
  std::size_t zero_weight_steps = 0;
  std::size_t list_length = 0; // length greedy inference would produce
};

/// Runs the supervised decode for one sample on `graph` and,
/// when `loss_scale` is non-zero, backpropagates loss * loss_scale into the
/// model's gradient accumulators.
SampleTrace supervised_trace(diff::Graph& graph, model::Model& model, const Example& ex, double alpha,
                             const LossFlags& flags, double loss_scale, bool measure_length = true);

/// The same loss as a graph scalar, without backward or length measurement.
diff::Var supervised_loss(diff::Graph& graph, model::Model& model, const Example& ex, double alpha,
                          const LossFlags& flags, SampleTrace* trace = nullptr);

struct BatchOutcome {
  double loss = 0.0;
  std::vector<std::int64_t> fail_ids;
  double mean_list_len = 0.0;
  std::vector<int> t_hats;
  std::size_t zero_weight_steps = 0;
  double e = 0.0;
};

BatchOutcome supervised_batch(model::Model& model, std::span<const Example* const> batch,
                              rewards::AlphaState& alpha, const TrainConfig& config);

/// Per-step rewards of a sampled episode: SCR up to the ground truth, -alpha after it, 0 for EOR.
std::vector<double> rl_rewards(const world::Sample& sample, std::span<const int> actions, std::size_t eor_index,
                               double alpha, bool scr_after_append);

struct Episode {
  std::vector<int> actions;
  std::vector<double> rewards;
  std::vector<double> returns;
  int t_hat = model::kNoStep;
  bool failed = false;
};

/// Builds the REINFORCE surrogate -sum log pi(a_t) * Q_t for one sampled
/// episode (or a frozen action sequence when `frozen` is given) and returns
/// the graph handle of that scalar.
diff::Var rl_surrogate(diff::Graph& graph, model::Model& model, const Example& ex, double alpha, double lambda,
                       Rng& rng, Episode& episode, const std::vector<int>* frozen = nullptr,
                       bool scr_after_append = false, double baseline = 0.0);

BatchOutcome rl_batch(model::Model& model, std::span<const Example* const> batch, rewards::AlphaState& alpha,
                      const TrainConfig& config, std::uint64_t batch_seed);

struct LogRow {
  std::size_t step = 0;
  std::size_t epoch = 0;
  double loss = 0.0;
  double e = 0.0;
  double alpha = 0.0;
  double mean_list_len = 0.0;
  std::optional<double> eval_mrr;
  std::optional<double> eval_lcr3;
};

struct TrainResult {
  model::Model model;
  rewards::AlphaState alpha;
  std::vector<LogRow> log;
  double best_mrr = -1.0;
};

struct RunOptions {
  std::filesystem::path out_dir;  // empty: no files written
  bool resume = false;
  std::string config_json = "{}";  // echoed into the log header
  std::function<void(const LogRow&)> on_row;
};

TrainResult run_training(const TrainConfig& config, const std::vector<world::Sample>& train,
                         const std::vector<world::Sample>& eval, const RunOptions& options = {});

std::string log_csv_header();
std::string log_csv_row(const LogRow& row);

}  // namespace scasrec::trainer
