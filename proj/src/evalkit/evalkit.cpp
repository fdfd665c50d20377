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

#include "scasrec/evalkit/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "scasrec/errors.hpp"

namespace scasrec::evalkit {

using diff::Graph;
using diff::Tensor;
using diff::Var;

MetricsReport evaluate_lists(const std::string& method, const std::vector<world::Sample>& samples,
                             const std::vector<std::vector<int>>& lists, std::span<const int> ks, double alpha) {
  if (samples.size() != lists.size()) throw ContractError("evaluate_lists: one list per sample required");
  MetricsReport r;
  r.method = method;
  r.ks.assign(ks.begin(), ks.end());
  r.hr.assign(ks.size(), 0.0);
  r.lcr.assign(ks.size(), 0.0);
  r.count = samples.size();
  if (samples.empty()) return r;
  std::vector<int> ranks;
  ranks.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    const auto& l = lists[i];
    ranks.push_back(rank_of(l, s.gt_index));
    for (std::size_t k = 0; k < ks.size(); ++k) {
      r.hr[k] += hr_at_k(l, s.gt_index, ks[k]);
      r.lcr[k] += lcr_at_k(l, s.cr, ks[k]);
    }
    r.mean_len += static_cast<double>(l.size());
    r.mean_z += redundant_count(l, s.gt_index);
    r.mean_f += objective_f(l, s.cr, s.gt_index, alpha);
  }
  const double n = static_cast<double>(samples.size());
  for (auto& v : r.hr) v /= n;
  for (auto& v : r.lcr) v /= n;
  r.mrr = mrr(ranks);
  r.mean_len /= n;
  r.mean_z /= n;
  r.mean_f /= n;
  return r;
}

std::string report_csv_header(std::span<const int> ks) {
  std::ostringstream o;
  o << "method";
  for (int k : ks) o << ",hr@" << k;
  for (int k : ks) o << ",lcr@" << k;
  o << ",mrr,mean_len,mean_z,mean_f";
  return o.str();
}

std::string report_csv_row(const MetricsReport& r) {
  std::ostringstream o;
  o.precision(10);
  o << r.method;
  for (double v : r.hr) o << ',' << v;
  for (double v : r.lcr) o << ',' << v;
  o << ',' << r.mrr << ',' << r.mean_len << ',' << r.mean_z << ',' << r.mean_f;
  return o.str();
}

Eigen::MatrixXd similarity_matrix(const world::Sample& s) {
  const auto n = static_cast<Eigen::Index>(s.candidates.size());
  Eigen::MatrixXd m(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    m(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double c = world::coverage_rate(s.candidates[static_cast<std::size_t>(i)].edge_ids,
                                            s.candidates[static_cast<std::size_t>(j)].edge_ids);
      m(i, j) = c;
      m(j, i) = c;
    }
  }
  return m;
}

std::vector<int> rank_by_score(std::span<const double> scores) {
  std::vector<int> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
    return scores[static_cast<std::size_t>(a)] > scores[static_cast<std::size_t>(b)];
  });
  return idx;
}

std::vector<int> baseline_mmr(std::span<const double> rel, const Eigen::MatrixXd& sim, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ContractError("baseline_mmr: lambda must be in [0, 1]");
  const std::size_t n = rel.size();
  if (static_cast<std::size_t>(sim.rows()) != n || static_cast<std::size_t>(sim.cols()) != n) {
    throw ShapeError("baseline_mmr: similarity matrix does not match relevance length");
  }
  std::vector<int> out;
  std::vector<char> used(n, 0);
  while (out.size() < n) {
    int best = -1;
    double best_v = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      if (used[i]) continue;
      double red = 0.0;
      for (int j : out) red = std::max(red, sim(static_cast<Eigen::Index>(i), j));
      const double v = lambda * rel[i] - (1.0 - lambda) * red;
      if (best < 0 || v > best_v) {
        best = static_cast<int>(i);
        best_v = v;
      }
    }
    used[static_cast<std::size_t>(best)] = 1;
    out.push_back(best);
  }
  return out;
}

std::vector<int> baseline_dpp_greedy(std::span<const double> q, const Eigen::MatrixXd& sim, std::size_t k) {
  const auto n = static_cast<Eigen::Index>(q.size());
  if (sim.rows() != n || sim.cols() != n) throw ShapeError("baseline_dpp_greedy: kernel size mismatch");
  Eigen::MatrixXd s = sim;
  s.diagonal().array() += kDppLoading;
  if (!s.isApprox(s.transpose(), 1e-12)) throw NumericError("DPP similarity matrix is not symmetric");
  Eigen::LLT<Eigen::MatrixXd> llt(s);
  if (llt.info() != Eigen::Success) throw NumericError("DPP kernel is not positive semi-definite");
  const Eigen::VectorXd qv = Eigen::Map<const Eigen::VectorXd>(q.data(), n);
  const Eigen::MatrixXd l = qv.asDiagonal() * s * qv.asDiagonal();

  // Incremental Cholesky: c holds one row per item, d2 the residual variances.
  const std::size_t steps = std::min<std::size_t>(k, static_cast<std::size_t>(n));
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(steps));
  Eigen::VectorXd d2 = l.diagonal();
  std::vector<char> used(static_cast<std::size_t>(n), 0);
  std::vector<int> out;
  for (std::size_t step = 0; step < steps; ++step) {
    Eigen::Index j = -1;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (used[static_cast<std::size_t>(i)]) continue;
      if (j < 0 || d2(i) > d2(j)) j = i;
    }
    if (!(d2(j) > 0.0)) throw NumericError("DPP greedy: non-positive residual variance");
    used[static_cast<std::size_t>(j)] = 1;
    out.push_back(static_cast<int>(j));
    const auto cols = static_cast<Eigen::Index>(step);
    const double dj = std::sqrt(d2(j));
    for (Eigen::Index i = 0; i < n; ++i) {
      if (used[static_cast<std::size_t>(i)]) continue;
      const double e = (l(j, i) - c.row(j).head(cols).dot(c.row(i).head(cols))) / dj;
      c(i, cols) = e;
      d2(i) -= e * e;
    }
  }
  return out;
}

std::vector<double> PointwiseModel::score(const world::Sample& sample) {
  Graph g(false);
  const auto in = features::prepare_inputs(sample, stats);
  const auto rep = features::assemble(g, params, fp, config.features, in);
  Var h = diff::tanh(diff::add_row(diff::matmul(rep.x_en, g.param(params, w1)), g.param(params, b1)));
  Var s = diff::add_row(diff::matmul(h, g.param(params, w2)), g.param(params, b2));
  const auto v = s.value().values();
  return {v.begin(), v.end()};
}

PointwiseModel train_pointwise(const std::vector<world::Sample>& train, const PointwiseConfig& cfg) {
  if (train.empty()) throw ConfigError("pointwise baseline: empty training set");
  PointwiseModel m;
  m.config = cfg;
  m.stats = features::fit_zscore(train);
  Rng rng(cfg.seed ^ 0x444E4Eull);
  m.fp = features::init_feature_params(m.params, cfg.features, m.stats.widths, rng);
  m.w1 = m.params.add("mlp.w1", features::glorot(cfg.features.model_width, cfg.hidden, rng));
  m.b1 = m.params.add("mlp.b1", Tensor(1, cfg.hidden));
  m.w2 = m.params.add("mlp.w2", features::glorot(cfg.hidden, 1, rng));
  m.b2 = m.params.add("mlp.b2", Tensor(1, 1));

  std::vector<features::SampleInputs> inputs;
  inputs.reserve(train.size());
  for (const auto& s : train) inputs.push_back(features::prepare_inputs(s, m.stats));
  std::vector<std::size_t> order(train.size());
  Graph g;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffler = Rng::stream(cfg.seed, 0x444E4E00ull + epoch);
    shuffler.shuffle(std::span<std::size_t>(order));
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      const double scale = 1.0 / static_cast<double>(end - begin);
      for (std::size_t b = begin; b < end; ++b) {
        const std::size_t i = order[b];
        g.clear();
        const auto rep = features::assemble(g, m.params, m.fp, cfg.features, inputs[i]);
        Var h = diff::tanh(diff::add_row(diff::matmul(rep.x_en, g.param(m.params, m.w1)), g.param(m.params, m.b1)));
        Var s = diff::add_row(diff::matmul(h, g.param(m.params, m.w2)), g.param(m.params, m.b2));
        // BCE with the ground truth as the only positive: log(1 - sigmoid(s)) = log(sigmoid(-s)).
        const auto gt = static_cast<std::size_t>(train[i].gt_index);
        Var neg = diff::log(diff::sigmoid(diff::scale(s, -1.0)));
        Var pos = diff::log(diff::sigmoid(diff::pick(s, gt, 0)));
        Var ll = diff::sum(neg) - diff::pick(neg, gt, 0) + pos;
        diff::backward(g, diff::scale(ll, -scale));
      }
      if (!m.params.grads_finite()) throw NumericError("pointwise baseline: non-finite gradient");
      diff::adam_step(m.params, {.learning_rate = cfg.learning_rate});
    }
  }
  return m;
}

std::vector<int> oracle_ranking(const world::Sample& s) { return rank_by_score(s.cr); }

std::vector<int> random_ranking(const world::Sample& s, Rng& rng) {
  std::vector<int> idx(s.candidates.size());
  std::iota(idx.begin(), idx.end(), 0);
  rng.shuffle(std::span<int>(idx));
  return idx;
}

std::vector<std::vector<int>> scasrec_lists(model::Model& m, const std::vector<world::Sample>& samples) {
  Graph g(false);
  std::vector<std::vector<int>> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(model::infer(g, m, s).selected);
  return out;
}

namespace {

std::vector<double> sigmoid_all(std::vector<double> v) {
  for (double& x : v) x = 1.0 / (1.0 + std::exp(-x));
  return v;
}

}  // namespace

std::vector<MetricsReport> evaluate(const std::vector<std::string>& methods, const std::vector<world::Sample>& eval,
                                    model::Model* model, PointwiseModel* dnn, const EvalOptions& opt) {
  std::vector<std::vector<int>> model_lists;
  const bool need_model = opt.truncate_to_model_len ||
                          std::find(methods.begin(), methods.end(), "scasrec") != methods.end();
  if (need_model) {
    if (model == nullptr) throw ConfigError("method scasrec (or truncation) requires a checkpoint");
    model_lists = scasrec_lists(*model, eval);
  }
  std::vector<std::vector<double>> scores;
  auto need_scores = [&] {
    if (dnn == nullptr) throw ConfigError("methods dnn/mmr/dpp require the pointwise baseline");
    if (scores.empty()) {
      scores.reserve(eval.size());
      for (const auto& s : eval) scores.push_back(dnn->score(s));
    }
  };

  std::vector<MetricsReport> out;
  for (const auto& method : methods) {
    std::vector<std::vector<int>> lists(eval.size());
    if (method == "scasrec") {
      lists = model_lists;
    } else if (method == "dnn") {
      need_scores();
      for (std::size_t i = 0; i < eval.size(); ++i) lists[i] = rank_by_score(scores[i]);
    } else if (method == "mmr") {
      need_scores();
      for (std::size_t i = 0; i < eval.size(); ++i) {
        lists[i] = baseline_mmr(sigmoid_all(scores[i]), similarity_matrix(eval[i]), opt.mmr_lambda);
      }
    } else if (method == "dpp") {
      need_scores();
      for (std::size_t i = 0; i < eval.size(); ++i) {
        lists[i] = baseline_dpp_greedy(sigmoid_all(scores[i]), similarity_matrix(eval[i]), eval[i].size());
      }
    } else if (method == "oracle") {
      for (std::size_t i = 0; i < eval.size(); ++i) lists[i] = oracle_ranking(eval[i]);
    } else if (method == "random") {
      Rng rng(opt.seed ^ 0x52414E44ull);
      for (std::size_t i = 0; i < eval.size(); ++i) lists[i] = random_ranking(eval[i], rng);
    } else {
      throw ConfigError("unknown method '" + method + "' (expected scasrec, dnn, mmr, dpp, oracle, random)");
    }
    if (opt.truncate_to_model_len && method != "scasrec") {
      for (std::size_t i = 0; i < eval.size(); ++i) {
        lists[i].resize(std::min(lists[i].size(), model_lists[i].size()));
      }
    }
    out.push_back(evaluate_lists(method, eval, lists, opt.ks, opt.alpha));
  }
  return out;
}

}  // namespace scasrec::evalkit
