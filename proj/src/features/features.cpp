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

#include "scasrec/features/features.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "scasrec/errors.hpp"

namespace scasrec::features {

using diff::Graph;
using diff::ParamStore;
using diff::Tensor;
using diff::Var;

namespace {

struct Moments {
  std::vector<double> sum, sq;
  std::size_t count = 0;

  explicit Moments(std::size_t width) : sum(width, 0.0), sq(width, 0.0) {}

  void add(const std::vector<double>& x, std::size_t expected) {
    if (x.size() != expected) {
      throw ConfigError("feature vector of width " + std::to_string(x.size()) + ", expected " +
                        std::to_string(expected));
    }
    for (std::size_t i = 0; i < x.size(); ++i) sum[i] += x[i];
    ++count;
  }
  void add_sq(const std::vector<double>& x, const std::vector<double>& mean, std::size_t offset) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double d = x[i] - mean[offset + i];
      sq[i] += d * d;
    }
  }
};

void normalize_into(std::span<const double> x, const NormStats& s, std::size_t offset, std::span<double> out) {
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (x[i] - s.mean[offset + i]) / s.std[offset + i];
}

}  // namespace

std::vector<diff::NamedTensor> NormStats::to_tensors() const {
  return {{"norm.mean", Tensor(1, mean.size(), mean)}, {"norm.std", Tensor(1, std.size(), std)}};
}

NormStats NormStats::from_tensors(const std::vector<diff::NamedTensor>& tensors, const world::FeatureWidths& widths) {
  const Tensor* m = diff::find_tensor(tensors, "norm.mean");
  const Tensor* s = diff::find_tensor(tensors, "norm.std");
  if (m == nullptr || s == nullptr) throw IoError("checkpoint lacks normalization statistics");
  const std::size_t expected = widths.route + widths.scene + widths.history;
  if (m->size() != expected || s->size() != expected) {
    throw ConfigError("normalization width " + std::to_string(m->size()) + " does not match feature width " +
                      std::to_string(expected));
  }
  NormStats out;
  out.widths = widths;
  out.mean.assign(m->values().begin(), m->values().end());
  out.std.assign(s->values().begin(), s->values().end());
  return out;
}

NormStats fit_zscore(const std::vector<world::Sample>& train) {
  if (train.size() < 2) throw ContractError("fit_zscore needs at least 2 samples");
  NormStats s;
  const auto& first = train.front();
  if (first.candidates.empty()) throw ContractError("fit_zscore: sample without candidates");
  s.widths.route = first.candidates.front().features.size();
  s.widths.scene = first.scene.size();
  s.widths.history = first.history.empty() ? s.widths.history : first.history.front().size();

  Moments route(s.widths.route), scene(s.widths.scene), hist(s.widths.history);
  for (const auto& x : train) {
    for (const auto& r : x.candidates) route.add(r.features, s.widths.route);
    scene.add(x.scene, s.widths.scene);
    for (const auto& h : x.history) hist.add(h, s.widths.history);
  }
  auto finish_mean = [&](Moments& m) {
    for (double& v : m.sum) v = m.count > 0 ? v / static_cast<double>(m.count) : 0.0;
    s.mean.insert(s.mean.end(), m.sum.begin(), m.sum.end());
  };
  finish_mean(route);
  finish_mean(scene);
  finish_mean(hist);
  for (const auto& x : train) {
    for (const auto& r : x.candidates) route.add_sq(r.features, s.mean, 0);
    scene.add_sq(x.scene, s.mean, s.scene_offset());
    for (const auto& h : x.history) hist.add_sq(h, s.mean, s.history_offset());
  }
  for (Moments* m : {&route, &scene, &hist}) {
    for (double v : m->sq) {
      const double sd = m->count > 0 ? std::sqrt(v / static_cast<double>(m->count)) : 0.0;
      s.std.push_back(std::max(sd, kStdFloor));
    }
  }
  return s;
}

void FeatureConfig::validate() const {
  if (model_width < 2 || model_width % 2 != 0) {
    throw ConfigError("model width must be an even number >= 2, got " + std::to_string(model_width));
  }
  if (history_width == 0 || din_hidden == 0 || scene_width == 0 || time_embedding == 0) {
    throw ConfigError("feature widths must be positive");
  }
}

FeatureParams FeatureParams::bind(const ParamStore& store) {
  FeatureParams p;
  p.time_table = store.index("emb.time");
  p.scene_w = store.index("scene.w");
  p.scene_b = store.index("scene.b");
  p.hist_w = store.index("hist.w");
  p.hist_b = store.index("hist.b");
  p.target_w = store.index("din.target.w");
  p.target_b = store.index("din.target.b");
  p.din_w1 = store.index("din.w1");
  p.din_b1 = store.index("din.b1");
  p.din_w2 = store.index("din.w2");
  p.din_b2 = store.index("din.b2");
  p.route_proj_w = store.index("proj.route.w");
  p.route_proj_b = store.index("proj.route.b");
  p.hist_proj_w = store.index("proj.hist.w");
  p.hist_proj_b = store.index("proj.hist.b");
  return p;
}

Tensor glorot(std::size_t rows, std::size_t cols, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Tensor t(rows, cols);
  for (double& v : t.values()) v = rng.uniform(-limit, limit);
  return t;
}

FeatureParams init_feature_params(ParamStore& store, const FeatureConfig& c, const world::FeatureWidths& w,
                                  Rng& rng) {
  c.validate();
  if (w.scene < 2) throw ConfigError("scene width must include the time bucket and one continuous slot");
  const std::size_t half = c.model_width / 2;
  Tensor table(world::kTimeBuckets + 1, c.time_embedding);
  for (double& v : table.values()) v = rng.normal() * 0.1;
  store.add("emb.time", std::move(table));
  store.add("scene.w", glorot(w.scene - 1 + c.time_embedding, c.scene_width, rng));
  store.add("scene.b", Tensor(1, c.scene_width));
  store.add("hist.w", glorot(w.history, c.history_width, rng));
  store.add("hist.b", Tensor(1, c.history_width));
  store.add("din.target.w", glorot(w.route + c.scene_width, c.history_width, rng));
  store.add("din.target.b", Tensor(1, c.history_width));
  store.add("din.w1", glorot(4 * c.history_width, c.din_hidden, rng));
  store.add("din.b1", Tensor(1, c.din_hidden));
  store.add("din.w2", glorot(c.din_hidden, 1, rng));
  store.add("din.b2", Tensor(1, 1));
  store.add("proj.route.w", glorot(w.route, half, rng));
  store.add("proj.route.b", Tensor(1, half));
  store.add("proj.hist.w", glorot(c.history_width, c.model_width - half, rng));
  store.add("proj.hist.b", Tensor(1, c.model_width - half));
  return FeatureParams::bind(store);
}

SampleInputs prepare_inputs(const world::Sample& sample, const NormStats& s) {
  if (!s.fitted()) throw ContractError("prepare_inputs: normalization statistics not fitted");
  const std::size_t n = sample.candidates.size();
  if (n == 0) throw ContractError("prepare_inputs: sample without candidates");
  if (sample.scene.size() != s.widths.scene) {
    throw ConfigError("scene width " + std::to_string(sample.scene.size()) + " does not match " +
                      std::to_string(s.widths.scene));
  }
  SampleInputs in;
  in.route = Tensor(n, s.widths.route);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& f = sample.candidates[i].features;
    if (f.size() != s.widths.route) {
      throw ConfigError("route width " + std::to_string(f.size()) + " does not match " +
                        std::to_string(s.widths.route));
    }
    normalize_into(f, s, 0, in.route.values().subspan(i * s.widths.route, s.widths.route));
  }
  in.time_bucket = static_cast<int>(std::lround(sample.scene[0]));
  in.scene = Tensor(1, s.widths.scene - 1);
  normalize_into(std::span<const double>(sample.scene).subspan(1), s, s.scene_offset() + 1, in.scene.values());
  if (!sample.history.empty()) {
    Tensor h(sample.history.size(), s.widths.history);
    for (std::size_t j = 0; j < sample.history.size(); ++j) {
      if (sample.history[j].size() != s.widths.history) {
        throw ConfigError("history width " + std::to_string(sample.history[j].size()) + " does not match " +
                          std::to_string(s.widths.history));
      }
      normalize_into(sample.history[j], s, s.history_offset(),
                     h.values().subspan(j * s.widths.history, s.widths.history));
    }
    in.history = std::move(h);
  }
  return in;
}

Var embed_discrete(Graph& g, ParamStore& store, int table, int id) {
  Var t = g.param(store, table);
  const int row = (id >= 0 && static_cast<std::size_t>(id) < t.rows()) ? id : 0;
  return diff::gather_rows(t, std::span<const int>(&row, 1));
}

Var history_attention(Graph& g, ParamStore& store, const FeatureParams& p, const FeatureConfig& c, Var route,
                      Var scene, const std::optional<Tensor>& history) {
  const std::size_t n = route.rows();
  if (!history) return g.constant(Tensor(n, c.history_width));
  const std::size_t m = history->rows();

  // Target: projection of [x_i^F ; E].
  std::vector<int> zeros(n, 0);
  Var target_in = diff::concat(route, diff::gather_rows(scene, zeros), 1);
  Var target = diff::tanh(diff::add_row(diff::matmul(target_in, g.param(store, p.target_w)), g.param(store, p.target_b)));
  Var records =
      diff::tanh(diff::add_row(diff::matmul(g.constant(*history), g.param(store, p.hist_w)), g.param(store, p.hist_b)));

  // Pair (i, j) lives in row i * m + j.
  std::vector<int> ti(n * m), hj(n * m);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      ti[i * m + j] = static_cast<int>(i);
      hj[i * m + j] = static_cast<int>(j);
    }
  }
  Var t = diff::gather_rows(target, ti);
  Var h = diff::gather_rows(records, hj);
  Var pair = diff::concat(diff::concat(t, h, 1), diff::concat(t - h, diff::mul(t, h), 1), 1);
  Var hidden = diff::tanh(diff::add_row(diff::matmul(pair, g.param(store, p.din_w1)), g.param(store, p.din_b1)));
  Var score = diff::matmul(hidden, g.param(store, p.din_w2));
  // A shared offset cancels under softmax, so the bias only enters the sigmoid gates.
  if (!c.softmax_history) score = diff::add_row(score, g.param(store, p.din_b2));
  score = diff::reshape(score, n, m);
  Var weights = c.softmax_history ? diff::softmax_rows(score) : diff::sigmoid(score);
  return diff::matmul(weights, records);
}

Representation assemble(Graph& g, ParamStore& store, const FeatureParams& p, const FeatureConfig& c,
                        const SampleInputs& in) {
  Var route = g.constant(in.route);
  const Tensor& w_route = store.at(p.route_proj_w).value;
  if (w_route.rows() != in.route.cols()) {
    throw ConfigError("route width " + std::to_string(in.route.cols()) + " does not match model input width " +
                      std::to_string(w_route.rows()));
  }
  Var scene_raw = diff::concat(g.constant(in.scene), embed_discrete(g, store, p.time_table, in.time_bucket), 1);
  Var scene =
      diff::tanh(diff::add_row(diff::matmul(scene_raw, g.param(store, p.scene_w)), g.param(store, p.scene_b)));
  Var xh = history_attention(g, store, p, c, route, scene, in.history);
  Var a = diff::add_row(diff::matmul(route, g.param(store, p.route_proj_w)), g.param(store, p.route_proj_b));
  Var b = diff::add_row(diff::matmul(xh, g.param(store, p.hist_proj_w)), g.param(store, p.hist_proj_b));
  return {diff::concat(a, b, 1), scene};
}

}  // namespace scasrec::features
