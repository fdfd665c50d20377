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
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "scasrec/diff/param_store.hpp"
#include "scasrec/evalkit/metrics.hpp"
#include "scasrec/features/features.hpp"
#include "scasrec/model/model.hpp"
#include "scasrec/world/dataset.hpp"

namespace scasrec::evalkit {

struct MetricsReport {
  std::string method;
  std::vector<int> ks;
  std::vector<double> hr;   // fraction of samples, per K
  std::vector<double> lcr;  // per K
  double mrr = 0.0;
  double mean_len = 0.0;
  double mean_z = 0.0;
  double mean_f = 0.0;
  std::size_t count = 0;
};

/// Aggregates per-sample ranked lists into a report.
MetricsReport evaluate_lists(const std::string& method, const std::vector<world::Sample>& samples,
                             const std::vector<std::vector<int>>& lists, std::span<const int> ks, double alpha);

std::string report_csv_header(std::span<const int> ks);
std::string report_csv_row(const MetricsReport& report);

/// Pairwise CR between candidate edge sets.
Eigen::MatrixXd similarity_matrix(const world::Sample& sample);

/// Candidates by descending score; ties to the lowest index.
std::vector<int> rank_by_score(std::span<const double> scores);

/// Maximal marginal relevance: lambda * rel(i) - (1 - lambda) * max_{j selected} sim(i, j).
std::vector<int> baseline_mmr(std::span<const double> relevance, const Eigen::MatrixXd& similarity, double lambda);

/// Fast greedy MAP inference for the kernel diag(q) S diag(q) with S
/// diagonal-loaded by 1e-6, up to K items.
std::vector<int> baseline_dpp_greedy(std::span<const double> quality, const Eigen::MatrixXd& similarity,
                                     std::size_t k);

inline constexpr double kDppLoading = 1e-6;

struct PointwiseConfig {
  features::FeatureConfig features;
  std::size_t hidden = 32;
  std::size_t epochs = 2;
  std::size_t batch_size = 128;
  double learning_rate = 1e-3;
  std::uint64_t seed = 1;
};

/// Per-route scorer: feature pipeline followed by a two-layer transform,
/// trained with binary cross-entropy against the ground-truth route.
struct PointwiseModel {
  PointwiseConfig config;
  features::NormStats stats;
  diff::ParamStore params;
  features::FeatureParams fp;
  int w1 = -1, b1 = -1, w2 = -1, b2 = -1;

  std::vector<double> score(const world::Sample& sample);
};

PointwiseModel train_pointwise(const std::vector<world::Sample>& train, const PointwiseConfig& config);

std::vector<int> oracle_ranking(const world::Sample& sample);
std::vector<int> random_ranking(const world::Sample& sample, Rng& rng);

struct EvalOptions {
  std::vector<int> ks = {1, 2, 3, 4, 5};
  double alpha = 0.1;
  double mmr_lambda = 0.7;
  bool truncate_to_model_len = false;
  std::uint64_t seed = 1;
};

/// Decodes every sample with the model (greedy, EOR-terminated).
std::vector<std::vector<int>> scasrec_lists(model::Model& model, const std::vector<world::Sample>& samples);

/// Runs the requested methods ("scasrec", "dnn", "mmr", "dpp", "oracle",
/// "random") and returns one report per method in request order. `dnn`
/// supplies the pointwise scores used by dnn, mmr and dpp; `model` is needed
/// for scasrec and for truncation.
std::vector<MetricsReport> evaluate(const std::vector<std::string>& methods, const std::vector<world::Sample>& eval,
                                    model::Model* model, PointwiseModel* dnn, const EvalOptions& options);

}  // namespace scasrec::evalkit
