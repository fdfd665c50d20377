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

#include "scasrec/cli/gradcheck_suite.hpp"

#include <algorithm>

#include "scasrec/diff/grad_check.hpp"
#include "scasrec/errors.hpp"
#include "scasrec/trainer/trainer.hpp"

namespace scasrec::cli {

using diff::Graph;
using diff::ParamStore;
using diff::Tensor;
using diff::Var;

namespace {

constexpr std::size_t kCandidates = 5;

world::WorldConfig tiny_world(std::uint64_t seed) {
  world::WorldConfig c;
  c.grid_width = 6;
  c.grid_height = 6;
  c.max_candidates = static_cast<int>(kCandidates);
  c.history_length = 3;
  c.users = 10;
  c.seed = seed;
  return c;
}

model::ModelConfig tiny_model_config() {
  model::ModelConfig c;
  c.features.model_width = 8;
  c.features.history_width = 4;
  c.features.din_hidden = 4;
  c.features.scene_width = 3;
  c.features.time_embedding = 2;
  c.head_hidden = 8;
  return c;
}

Tensor random_tensor(std::size_t rows, std::size_t cols, Rng& rng) {
  Tensor t(rows, cols);
  for (double& v : t.values()) v = rng.normal();
  return t;
}

}  // namespace

const std::vector<std::string>& gradcheck_components() {
  static const std::vector<std::string> names = {"features", "encoder", "state_attention", "supervised_loss",
                                                 "rl_surrogate"};
  return names;
}

std::vector<ComponentCheck> run_gradcheck_suite(std::uint64_t seed, const std::string& corrupt) {
  const auto& names = gradcheck_components();
  if (!corrupt.empty() && std::find(names.begin(), names.end(), corrupt) == names.end()) {
    throw ConfigError("unknown gradcheck component '" + corrupt + "'");
  }
  // Draw samples until five with exactly N = 5 candidates are available.
  std::vector<world::Sample> samples;
  for (std::int64_t first = 0; samples.size() < 5; first += 40) {
    for (auto& s : world::generate_dataset(tiny_world(seed), first, 40)) {
      if (s.size() == kCandidates && samples.size() < 5) samples.push_back(std::move(s));
    }
    if (first > 4000) throw NumericError("gradcheck: no five-candidate samples in the tiny world");
  }
  model::Model m = model::make_model(tiny_model_config(), world::FeatureWidths{}, seed);
  m.stats = features::fit_zscore(samples);
  const auto examples = trainer::prepare_examples(samples, m.stats);
  const trainer::Example& ex = examples[0];
  const std::size_t f = m.config.features.model_width;
  Rng rng = Rng::stream(seed, 0x4743);
  const Tensor probe_x = random_tensor(kCandidates, f, rng);
  const Tensor probe_s = random_tensor(kCandidates + 1, f, rng);
  const Tensor xde = random_tensor(kCandidates + 1, f, rng);
  const Tensor sel = random_tensor(3, f, rng);

  // A fixed RL trajectory: sampled once, then frozen.
  std::vector<int> frozen;
  {
    Graph g;
    Rng sampler = Rng::stream(seed, 0x524C);
    trainer::Episode ep;
    trainer::rl_surrogate(g, m, ex, 0.1, 0.5, sampler, ep);
    frozen = ep.actions;
  }

  std::vector<ComponentCheck> out;
  for (const auto& name : names) {
    diff::LossBuilder loss;
    if (name == "features") {
      loss = [&](Graph& g, ParamStore& s) {
        const auto rep = features::assemble(g, s, m.fp, m.config.features, ex.inputs);
        return diff::sum(diff::mul(diff::tanh(rep.x_en), g.constant(probe_x)));
      };
    } else if (name == "encoder") {
      loss = [&](Graph& g, ParamStore& s) {
        const auto rep = features::assemble(g, s, m.fp, m.config.features, ex.inputs);
        const auto enc = model::encode(g, m, rep);
        return diff::sum(diff::mul(diff::tanh(enc.s_en), g.constant(probe_s)));
      };
    } else if (name == "state_attention") {
      loss = [&](Graph& g, ParamStore&) {
        return diff::sum(model::state_attention(g, m, g.constant(xde), g.constant(sel)));
      };
    } else if (name == "supervised_loss") {
      loss = [&](Graph& g, ParamStore&) { return trainer::supervised_loss(g, m, ex, 0.1, {}); };
    } else {
      loss = [&](Graph& g, ParamStore&) {
        Rng unused(0);
        trainer::Episode ep;
        return trainer::rl_surrogate(g, m, ex, 0.1, 0.5, unused, ep, &frozen);
      };
    }
    diff::GradCheckOptions opt;
    if (name == corrupt) {
      opt.tamper = [](ParamStore& s) {
        for (auto& p : s.params()) p.grad[0] += 0.5;
      };
    }
    const auto r = diff::grad_check(m.params, loss, opt);
    out.push_back({name, r.max_rel_error, r.worst_param + "[" + std::to_string(r.worst_index) + "]", r.pass});
  }
  return out;
}

}  // namespace scasrec::cli
