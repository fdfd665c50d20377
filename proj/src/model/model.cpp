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

#include "scasrec/model/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "scasrec/errors.hpp"

namespace scasrec::model {

using diff::Graph;
using diff::ParamStore;
using diff::Tensor;
using diff::Var;
using features::glorot;

namespace {

SceneBlockParams add_scene_block(ParamStore& store, const std::string& prefix, std::size_t width,
                                 std::size_t hidden, std::size_t scene_width, Rng& rng) {
  store.add(prefix + ".w1", glorot(width, hidden, rng));
  store.add(prefix + ".b1", Tensor(1, hidden));
  store.add(prefix + ".w2", glorot(hidden, width, rng));
  store.add(prefix + ".b2", Tensor(1, width));
  store.add(prefix + ".gamma.w", glorot(scene_width, hidden, rng));
  store.add(prefix + ".gamma.b", Tensor(1, hidden));
  store.add(prefix + ".beta.w", glorot(scene_width, hidden, rng));
  store.add(prefix + ".beta.b", Tensor(1, hidden));
  SceneBlockParams p;
  p.w1 = store.index(prefix + ".w1");
  p.b1 = store.index(prefix + ".b1");
  p.w2 = store.index(prefix + ".w2");
  p.b2 = store.index(prefix + ".b2");
  p.gamma_w = store.index(prefix + ".gamma.w");
  p.gamma_b = store.index(prefix + ".gamma.b");
  p.beta_w = store.index(prefix + ".beta.w");
  p.beta_b = store.index(prefix + ".beta.b");
  return p;
}

SceneBlockParams bind_scene_block(const ParamStore& store, const std::string& prefix) {
  SceneBlockParams p;
  p.w1 = store.index(prefix + ".w1");
  p.b1 = store.index(prefix + ".b1");
  p.w2 = store.index(prefix + ".w2");
  p.b2 = store.index(prefix + ".b2");
  p.gamma_w = store.index(prefix + ".gamma.w");
  p.gamma_b = store.index(prefix + ".gamma.b");
  p.beta_w = store.index(prefix + ".beta.w");
  p.beta_b = store.index(prefix + ".beta.b");
  return p;
}

Var linear(Graph& g, ParamStore& s, Var x, int w, int b) {
  return diff::add_row(diff::matmul(x, g.param(s, w)), g.param(s, b));
}

// gamma = 1 + E W + b, beta = E W + b.
std::pair<Var, Var> modulation(Graph& g, ParamStore& s, Var scene, int gw, int gb, int bw, int bb) {
  return {diff::add_scalar(linear(g, s, scene, gw, gb), 1.0), linear(g, s, scene, bw, bb)};
}

Tensor config_tensor(const Model& m) {
  const auto& c = m.config;
  const auto& f = c.features;
  std::vector<double> v = {static_cast<double>(f.model_width), static_cast<double>(f.history_width),
                           static_cast<double>(f.din_hidden),  static_cast<double>(f.scene_width),
                           static_cast<double>(f.time_embedding), f.softmax_history ? 1.0 : 0.0,
                           static_cast<double>(c.head_hidden), static_cast<double>(c.max_steps),
                           c.keep_start ? 1.0 : 0.0,           c.use_eor ? 1.0 : 0.0,
                           static_cast<double>(m.widths.route), static_cast<double>(m.widths.scene),
                           static_cast<double>(m.widths.history)};
  const std::size_t n = v.size();
  return Tensor(1, n, std::move(v));
}

}  // namespace

void ModelConfig::validate() const {
  features.validate();
  if (head_hidden == 0) throw ConfigError("head width must be positive");
  if (max_steps == 0) throw ConfigError("T_max must be >= 1");
}

ModelParams ModelParams::bind(const ParamStore& store) {
  ModelParams p;
  p.enc_wq = store.index("enc.wq");
  p.enc_wk = store.index("enc.wk");
  p.enc_wv = store.index("enc.wv");
  p.enc_block = bind_scene_block(store, "enc.block");
  p.eor = store.index("eor");
  p.start = store.index("start");
  p.dec_wq = store.index("dec.wq");
  p.dec_wk = store.index("dec.wk");
  p.dec_wv = store.index("dec.wv");
  p.head_w_enc = store.index("head.w_enc");
  p.head_w_dec = store.index("head.w_dec");
  p.head_b1 = store.index("head.b1");
  p.head_w2 = store.index("head.w2");
  p.head_gamma_w = store.index("head.gamma.w");
  p.head_gamma_b = store.index("head.gamma.b");
  p.head_beta_w = store.index("head.beta.w");
  p.head_beta_b = store.index("head.beta.b");
  return p;
}

Model make_model(const ModelConfig& config, const world::FeatureWidths& widths, std::uint64_t seed) {
  config.validate();
  Model m;
  m.config = config;
  m.widths = widths;
  Rng rng(seed);
  ParamStore& s = m.params;
  const std::size_t f = config.features.model_width;
  const std::size_t e = config.features.scene_width;
  const std::size_t h = config.head_hidden;
  m.fp = features::init_feature_params(s, config.features, widths, rng);
  s.add("enc.wq", glorot(f, f, rng));
  s.add("enc.wk", glorot(f, f, rng));
  s.add("enc.wv", glorot(f, f, rng));
  add_scene_block(s, "enc.block", f, f, e, rng);
  Tensor eor(1, f), start(1, f);
  for (double& v : eor.values()) v = rng.normal() * 0.1;
  for (double& v : start.values()) v = rng.normal() * 0.1;
  s.add("eor", std::move(eor));
  s.add("start", std::move(start));
  s.add("dec.wq", glorot(f, f, rng));
  s.add("dec.wk", glorot(f, f, rng));
  s.add("dec.wv", glorot(f, f, rng));
  s.add("head.w_enc", glorot(f, h, rng));
  s.add("head.w_dec", glorot(f, h, rng));
  s.add("head.b1", Tensor(1, h));
  s.add("head.w2", glorot(h, 1, rng));
  s.add("head.gamma.w", glorot(e, h, rng));
  s.add("head.gamma.b", Tensor(1, h));
  s.add("head.beta.w", glorot(e, h, rng));
  s.add("head.beta.b", Tensor(1, h));
  m.mp = ModelParams::bind(s);
  return m;
}

void save_model(const std::filesystem::path& path, const Model& model, bool with_optimizer,
                const std::vector<diff::NamedTensor>& extra) {
  if (!model.stats.fitted()) throw ContractError("save_model: normalization statistics not fitted");
  std::vector<diff::NamedTensor> out;
  out.push_back({"model.config", config_tensor(model)});
  for (auto& t : model.stats.to_tensors()) out.push_back(std::move(t));
  for (auto& t : diff::export_params(model.params, with_optimizer)) out.push_back(std::move(t));
  for (const auto& t : extra) out.push_back(t);
  diff::write_container(path, out);
}

Model load_model(const std::filesystem::path& path, std::vector<diff::NamedTensor>* entries) {
  auto all = diff::read_container(path);
  const Tensor* c = diff::find_tensor(all, "model.config");
  if (c == nullptr || c->size() != 13) throw IoError("checkpoint " + path.string() + " lacks a model config");
  auto at = [&](std::size_t i) { return static_cast<std::size_t>((*c)[i]); };
  ModelConfig cfg;
  cfg.features.model_width = at(0);
  cfg.features.history_width = at(1);
  cfg.features.din_hidden = at(2);
  cfg.features.scene_width = at(3);
  cfg.features.time_embedding = at(4);
  cfg.features.softmax_history = (*c)[5] != 0.0;
  cfg.head_hidden = at(6);
  cfg.max_steps = at(7);
  cfg.keep_start = (*c)[8] != 0.0;
  cfg.use_eor = (*c)[9] != 0.0;
  world::FeatureWidths w{at(10), at(11), at(12)};
  Model m = make_model(cfg, w, 0);
  m.stats = features::NormStats::from_tensors(all, w);
  diff::import_params(m.params, all);
  if (entries != nullptr) *entries = std::move(all);
  return m;
}

Var scene_block(Graph& g, ParamStore& s, const SceneBlockParams& p, Var x, Var scene) {
  auto [gamma, beta] = modulation(g, s, scene, p.gamma_w, p.gamma_b, p.beta_w, p.beta_b);
  Var hidden = diff::tanh(linear(g, s, x, p.w1, p.b1));
  hidden = diff::add_row(diff::mul_row(hidden, gamma), beta);
  return x + linear(g, s, hidden, p.w2, p.b2);
}

EncoderState encode(Graph& g, Model& m, const features::Representation& rep) {
  ParamStore& s = m.params;
  const ModelParams& p = m.mp;
  Var x = rep.x_en;
  const std::size_t n = x.rows();
  if (n == 0) throw ContractError("encode: no candidates");
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(x.cols()));
  Var q = diff::matmul(x, g.param(s, p.enc_wq));
  Var k = diff::matmul(x, g.param(s, p.enc_wk));
  Var v = diff::matmul(x, g.param(s, p.enc_wv));
  Var attn = diff::softmax_rows(diff::scale(diff::matmul(q, diff::transpose(k)), inv_sqrt));
  Var h = x + diff::matmul(attn, v);
  Var out = scene_block(g, s, p.enc_block, h, rep.scene);

  EncoderState enc;
  enc.n = n;
  Var eor = g.param(s, p.eor);
  enc.s_en = diff::concat(out, eor, 0);
  enc.x_de = diff::concat(x, eor, 0);
  enc.query = diff::matmul(enc.x_de, g.param(s, p.dec_wq));
  enc.head_base = linear(g, s, enc.s_en, p.head_w_enc, p.head_b1);
  std::tie(enc.gamma, enc.beta) =
      modulation(g, s, rep.scene, p.head_gamma_w, p.head_gamma_b, p.head_beta_w, p.head_beta_b);
  return enc;
}

Var state_attention_q(Graph& g, Model& m, Var query, Var selected) {
  ParamStore& s = m.params;
  Var k = diff::matmul(selected, g.param(s, m.mp.dec_wk));
  Var v = diff::matmul(selected, g.param(s, m.mp.dec_wv));
  return diff::matmul(diff::sigmoid(diff::matmul(query, diff::transpose(k))), v);
}

Var state_attention(Graph& g, Model& m, Var x_de, Var selected) {
  return state_attention_q(g, m, diff::matmul(x_de, g.param(m.params, m.mp.dec_wq)), selected);
}

Var selected_rows(Graph& g, Model& m, const EncoderState& enc, std::span<const int> selected) {
  Var start = g.param(m.params, m.mp.start);
  if (selected.empty()) return start;
  Var items = diff::gather_rows(enc.x_de, selected);
  return m.config.keep_start ? diff::concat(start, items, 0) : items;
}

Var decode_step(Graph& g, Model& m, const EncoderState& enc, std::span<const int> selected) {
  ParamStore& s = m.params;
  Var sde = state_attention_q(g, m, enc.query, selected_rows(g, m, enc, selected));
  // Modulation sits inside the nonlinearity: a shift after it would move every logit equally.
  Var pre = enc.head_base + diff::matmul(sde, g.param(s, m.mp.head_w_dec));
  Var hidden = diff::tanh(diff::add_row(diff::mul_row(pre, enc.gamma), enc.beta));
  Var logits = diff::reshape(diff::matmul(hidden, g.param(s, m.mp.head_w2)), 1, enc.n + 1);
  std::vector<int> masked(selected.begin(), selected.end());
  if (!m.config.use_eor) masked.push_back(static_cast<int>(enc.n));
  if (!masked.empty()) logits = diff::masked_add(logits, masked);
  return diff::softmax_rows(logits);
}

std::size_t step_limit(const Model& m, std::size_t n) { return std::min(n, m.config.max_steps); }

std::size_t argmax(std::span<const double> p, bool skip_last) {
  const std::size_t end = skip_last ? p.size() - 1 : p.size();
  std::size_t best = 0;
  for (std::size_t i = 1; i < end; ++i) {
    if (p[i] > p[best]) best = i;
  }
  return best;
}

namespace {

template <typename Pick>
DecodeState run_decode(Graph& g, Model& m, const EncoderState& enc, int gt_index, Pick pick) {
  DecodeState st;
  const std::size_t limit = step_limit(m, enc.n);
  while (st.selected.size() < limit) {
    Var p = decode_step(g, m, enc, st.selected);
    const auto values = p.value().values();
    const std::size_t a = pick(values);
    st.prob_vars.push_back(p);
    st.probs.emplace_back(values.begin(), values.end());
    st.actions.push_back(static_cast<int>(a));
    st.log_probs.push_back(std::log(values[a]));
    if (a == enc.n) {
      st.stopped_by_eor = true;
      break;
    }
    st.selected.push_back(static_cast<int>(a));
    if (static_cast<int>(a) == gt_index) st.t_hat = st.t;
    ++st.t;
  }
  return st;
}

}  // namespace

DecodeState greedy_decode(Graph& g, Model& m, const EncoderState& enc, int gt_index) {
  return run_decode(g, m, enc, gt_index, [](std::span<const double> p) { return argmax(p); });
}

DecodeState sample_decode(Graph& g, Model& m, const EncoderState& enc, Rng& rng, int gt_index) {
  return run_decode(g, m, enc, gt_index, [&](std::span<const double> p) {
    const double u = rng.uniform();
    double acc = 0.0;
    std::size_t last = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (p[i] <= 0.0) continue;
      acc += p[i];
      last = i;
      if (u < acc) return i;
    }
    return last;
  });
}

DecodeState infer(Graph& g, Model& m, const world::Sample& sample) {
  g.clear();
  const auto inputs = features::prepare_inputs(sample, m.stats);
  const auto rep = features::assemble(g, m.params, m.fp, m.config.features, inputs);
  const auto enc = encode(g, m, rep);
  return greedy_decode(g, m, enc, sample.gt_index);
}

}  // namespace scasrec::model
