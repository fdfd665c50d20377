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

#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "scasrec/diff/grad_check.hpp"
#include "scasrec/errors.hpp"
#include "scasrec/features/features.hpp"
#include "test_support.hpp"

using namespace scasrec;
using namespace scasrec::features;
using diff::Graph;
using diff::ParamStore;
using diff::Tensor;
using diff::Var;

namespace {

world::Sample tiny_sample(std::vector<std::vector<double>> routes, std::vector<double> scene,
                          std::vector<std::vector<double>> history = {}) {
  world::Sample s;
  for (std::size_t i = 0; i < routes.size(); ++i) s.candidates.push_back({{static_cast<int>(i)}, routes[i]});
  s.scene = std::move(scene);
  s.history = std::move(history);
  s.trajectory = {0};
  world::label_coverage(s);
  return s;
}

}  // namespace

TEST_CASE("fit_zscore on hand-computed columns") {
  // Route column 0: [1, 1, 1] (constant); column 1: [0, 2, ...].
  std::vector<world::Sample> train = {tiny_sample({{1.0, 0.0}}, {1, 5.0}), tiny_sample({{1.0, 2.0}}, {2, 7.0})};
  const NormStats s = fit_zscore(train);
  REQUIRE(s.widths.route == 2);
  CHECK(s.mean[0] == 1.0);
  CHECK(s.std[0] == kStdFloor);
  CHECK(s.mean[1] == 1.0);
  CHECK(s.std[1] == 1.0);
  const auto in = prepare_inputs(train[0], s);
  CHECK(in.route(0, 0) == 0.0);
  CHECK(in.route(0, 1) == -1.0);
  CHECK(prepare_inputs(train[1], s).route(0, 1) == 1.0);
  CHECK(fit_zscore(train) == s);
  CHECK_THROWS_AS(fit_zscore({train[0]}), ContractError);
}

TEST_CASE("normalization stats survive the checkpoint container") {
  const auto samples = world::generate_dataset(testing::small_world(3), 0, 20);
  const NormStats s = fit_zscore(samples);
  CHECK(NormStats::from_tensors(s.to_tensors(), s.widths) == s);
  world::FeatureWidths wrong = s.widths;
  wrong.route += 1;
  CHECK_THROWS_AS(NormStats::from_tensors(s.to_tensors(), wrong), ConfigError);
}

TEST_CASE("embed_discrete") {
  ParamStore store;
  Rng rng(1);
  Tensor table(7, 3);
  for (double& v : table.values()) v = rng.normal();
  const int idx = store.add("emb", table);
  Graph g;
  CHECK(embed_discrete(g, store, idx, 0).value() == embed_discrete(g, store, idx, 0).value());
  CHECK(embed_discrete(g, store, idx, 42).value() == embed_discrete(g, store, idx, 0).value());
  CHECK(embed_discrete(g, store, idx, -3).value() == embed_discrete(g, store, idx, 0).value());

  g.clear();
  Var e = embed_discrete(g, store, idx, 3);
  diff::backward(g, diff::sum(diff::mul(e, e)));
  const Tensor& grad = store.at(idx).grad;
  for (std::size_t r = 0; r < 7; ++r) {
    for (std::size_t c = 0; c < 3; ++c) {
      if (r == 3) {
        CHECK(grad(r, c) == doctest::Approx(2.0 * table(r, c)));
      } else {
        CHECK(grad(r, c) == 0.0);
      }
    }
  }
}

TEST_CASE("history attention edge cases") {
  FeatureConfig cfg;
  cfg.model_width = 8;
  cfg.history_width = 4;
  cfg.din_hidden = 5;
  cfg.scene_width = 3;
  world::FeatureWidths w{6, 4, 7};
  ParamStore store;
  Rng rng(9);
  const FeatureParams p = init_feature_params(store, cfg, w, rng);
  Graph g;
  Tensor route(3, 6), scene(1, 3);
  for (double& v : route.values()) v = rng.normal();
  for (double& v : scene.values()) v = rng.normal();

  SUBCASE("empty history gives zeros") {
    Var out = history_attention(g, store, p, cfg, g.constant(route), g.constant(scene), std::nullopt);
    CHECK(out.rows() == 3);
    CHECK(out.cols() == 4);
    for (double v : out.value().values()) CHECK(v == 0.0);
  }

  SUBCASE("single record is its gate times the projected record") {
    Tensor h(1, 7);
    for (double& v : h.values()) v = rng.normal();
    Var out = history_attention(g, store, p, cfg, g.constant(route), g.constant(scene), h);
    // Independent evaluation of the projected record.
    const Tensor& hw = store["hist.w"].value;
    const Tensor& hb = store["hist.b"].value;
    std::vector<double> proj(4);
    for (std::size_t k = 0; k < 4; ++k) {
      double acc = hb[k];
      for (std::size_t j = 0; j < 7; ++j) acc += h[j] * hw(j, k);
      proj[k] = std::tanh(acc);
    }
    for (std::size_t i = 0; i < 3; ++i) {
      // All coordinates share one gate in (0, 1).
      const double gate = out.value()(i, 0) / proj[0];
      CHECK(gate > 0.0);
      CHECK(gate < 1.0);
      for (std::size_t k = 0; k < 4; ++k) CHECK(out.value()(i, k) == doctest::Approx(gate * proj[k]).epsilon(1e-12));
    }
  }

  SUBCASE("permuting history records leaves the output unchanged") {
    Tensor h(5, 7);
    for (double& v : h.values()) v = rng.normal();
    Tensor h2(5, 7);
    const int perm[] = {3, 0, 4, 1, 2};
    for (std::size_t r = 0; r < 5; ++r) {
      for (std::size_t c = 0; c < 7; ++c) h2(r, c) = h(static_cast<std::size_t>(perm[r]), c);
    }
    for (bool softmax : {false, true}) {
      cfg.softmax_history = softmax;
      Var a = history_attention(g, store, p, cfg, g.constant(route), g.constant(scene), h);
      Var b = history_attention(g, store, p, cfg, g.constant(route), g.constant(scene), h2);
      for (std::size_t i = 0; i < a.value().size(); ++i) CHECK(a.value()[i] == doctest::Approx(b.value()[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("assemble shapes, determinism and width checks") {
  auto samples = world::generate_dataset(testing::small_world(4), 0, 10);
  const NormStats stats = fit_zscore(samples);
  FeatureConfig cfg;
  cfg.model_width = 8;
  ParamStore store;
  Rng rng(2);
  const FeatureParams p = init_feature_params(store, cfg, stats.widths, rng);
  Graph g;
  for (const auto& s : samples) {
    const auto rep = assemble(g, store, p, cfg, prepare_inputs(s, stats));
    CHECK(rep.x_en.rows() == s.size());
    CHECK(rep.x_en.cols() == 8);
    CHECK(rep.scene.cols() == cfg.scene_width);
    CHECK(rep.x_en.value().all_finite());
  }
  // Identical candidates give identical rows.
  world::Sample twin = samples[0];
  twin.candidates[1] = twin.candidates[0];
  const auto rep = assemble(g, store, p, cfg, prepare_inputs(twin, stats));
  for (std::size_t c = 0; c < 8; ++c) CHECK(rep.x_en.value()(0, c) == rep.x_en.value()(1, c));
  const auto again = assemble(g, store, p, cfg, prepare_inputs(twin, stats));
  CHECK(again.x_en.value() == rep.x_en.value());

  world::Sample bad = samples[0];
  bad.candidates[0].features.push_back(1.0);
  CHECK_THROWS_AS(prepare_inputs(bad, stats), ConfigError);
  FeatureConfig odd = cfg;
  odd.model_width = 7;
  CHECK_THROWS_AS(odd.validate(), ConfigError);
}

TEST_CASE("feature pipeline gradient check") {
  auto samples = world::generate_dataset(testing::small_world(5), 0, 6);
  const NormStats stats = fit_zscore(samples);
  for (bool softmax : {false, true}) {
    FeatureConfig cfg;
    cfg.model_width = 8;
    cfg.history_width = 4;
    cfg.din_hidden = 4;
    cfg.scene_width = 3;
    cfg.time_embedding = 2;
    cfg.softmax_history = softmax;
    ParamStore store;
    Rng rng(11);
    const FeatureParams p = init_feature_params(store, cfg, stats.widths, rng);
    const auto inputs = prepare_inputs(samples[2], stats);
    Tensor probe(inputs.route.rows(), 8);
    for (double& v : probe.values()) v = rng.normal();
    const auto r = diff::grad_check(store, [&](Graph& g, ParamStore& s) {
      const auto rep = assemble(g, s, p, cfg, inputs);
      return diff::sum(diff::mul(diff::tanh(rep.x_en), g.constant(probe)));
    });
    INFO(r.worst_param, "[", r.worst_index, "] analytic ", r.analytic, " numeric ", r.numeric);
    CHECK(r.pass);
    CHECK(r.max_rel_error <= 1e-4);
  }
}
