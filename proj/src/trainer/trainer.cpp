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

#include "scasrec/trainer/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "scasrec/errors.hpp"
#include "scasrec/evalkit/metrics.hpp"
#include "scasrec/util/provenance.hpp"

namespace scasrec::trainer {

using diff::Graph;
using diff::Var;
using model::kNoStep;

void TrainConfig::validate() const {
  model.validate();
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (epochs == 0) throw ConfigError("epochs must be positive");
  if (!(lambda > 0.0 && lambda <= 1.0)) throw ConfigError("lambda must be in (0, 1]");
  if (!(flags.reward_floor >= 0.0)) throw ConfigError("reward floor must be >= 0");
  rewards::AlphaState{alpha, eta, beta, 0.0}.validate();
}

std::vector<Example> prepare_examples(const std::vector<world::Sample>& samples, const features::NormStats& stats) {
  std::vector<Example> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back({&s, features::prepare_inputs(s, stats)});
  return out;
}

namespace {

Var sum_terms(const std::vector<Var>& terms) {
  Var total = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) total = total + terms[i];
  return total;
}

[[noreturn]] void numeric_abort(std::span<const Example* const> batch, const std::string& what) {
  std::ostringstream ids;
  for (const Example* ex : batch) ids << ' ' << ex->sample->sample_id;
  throw NumericError(what + "; batch sample ids:" + ids.str());
}

// Runs `body`, turning domain failures of the tape into the batch diagnostic.
template <typename Body>
void guarded(std::span<const Example* const> batch, Body body) {
  try {
    body();
  } catch (const DomainError& e) {
    numeric_abort(batch, std::string("non-finite loss (") + e.what() + ")");
  }
}

}  // namespace

namespace {

// Supervised decode for one sample. When `objective` is non-null the weighted
// log-likelihood terms are recorded and their sum stored there.
SampleTrace run_trace(Graph& g, model::Model& m, const Example& ex, double alpha, const LossFlags& flags,
                      Var* objective, bool measure_length) {
  const world::Sample& s = *ex.sample;
  g.clear();
  const auto rep = features::assemble(g, m.params, m.fp, m.config.features, ex.inputs);
  const auto enc = model::encode(g, m, rep);
  const int n = static_cast<int>(enc.n);
  const int eor = n;
  const int horizon = static_cast<int>(model::step_limit(m, enc.n));
  const int gt = s.gt_index;
  const double gt_cr = s.gt_cr();
  const bool use_eor = m.config.use_eor;

  SampleTrace tr;
  std::vector<int> selected;
  std::vector<double> list_cr;
  std::vector<Var> terms;
  int length = -1;       // inference list length, once EOR wins the full argmax
  bool pending = false;  // last P_t belongs to the current list
  std::size_t last_full = 0;

  for (int t = 1; t <= horizon + 1; ++t) {
    const int t_hat = tr.t_hat == kNoStep ? horizon + 1 : tr.t_hat;
    if (t == horizon + 1 && !(use_eor && t_hat == horizon)) break;
    if (!use_eor && t == t_hat + 1) break;

    Var p = model::decode_step(g, m, enc, selected);
    const auto pv = p.value().values();
    tr.probs.emplace_back(pv.begin(), pv.end());
    const std::size_t full = model::argmax(pv);
    const std::size_t action = model::argmax(pv, true);
    if (length < 0 && full == static_cast<std::size_t>(eor)) length = static_cast<int>(selected.size());
    pending = true;
    last_full = full;

    const int label = use_eor ? rewards::build_label(t, t_hat, gt, eor) : gt;
    double w = 0.0;
    if (label == gt) {
      if (flags.disable_scr) {
        w = 1.0;
      } else {
        std::vector<double> seen = list_cr;
        if (flags.scr_after_append) seen.push_back(s.cr[action]);
        w = rewards::combined_reward(rewards::scr(gt_cr, seen), rewards::eor_reward(t, t_hat, alpha));
      }
      if (flags.reward_floor > 0.0) w = std::max(w, flags.reward_floor);
    } else {
      w = rewards::combined_reward(0.0, rewards::eor_reward(t, t_hat, alpha));
    }
    const double pl = pv[static_cast<std::size_t>(label)];
    tr.labels.push_back(label);
    tr.weights.push_back(w);
    tr.label_probs.push_back(pl);
    if (w == 0.0) {
      ++tr.zero_weight_steps;
    } else {
      tr.loss -= w * std::log(pl);
      if (objective != nullptr) {
        terms.push_back(diff::scale(diff::log(diff::pick(p, 0, static_cast<std::size_t>(label))), -w));
      }
    }

    if (t == t_hat + 1) break;  // EOR supervision done

    selected.push_back(static_cast<int>(action));
    list_cr.push_back(s.cr[action]);
    tr.appended.push_back(static_cast<int>(action));
    pending = false;
    if (static_cast<int>(action) == gt) tr.t_hat = t;
    if (full == static_cast<std::size_t>(eor)) tr.failed = true;
  }
  if (tr.t_hat == kNoStep) tr.failed = true;

  if (objective != nullptr) *objective = terms.empty() ? g.constant(diff::Tensor(1, 1)) : sum_terms(terms);

  if (length < 0 && measure_length) {
    const std::size_t limit = model::step_limit(m, enc.n);
    if (pending && last_full != static_cast<std::size_t>(eor) && selected.size() < limit) {
      selected.push_back(static_cast<int>(last_full));
    }
    while (selected.size() < limit) {
      Var p = model::decode_step(g, m, enc, selected);
      const std::size_t full = model::argmax(p.value().values());
      if (full == static_cast<std::size_t>(eor)) break;
      selected.push_back(static_cast<int>(full));
    }
    length = static_cast<int>(selected.size());
  }
  tr.list_length = length < 0 ? 0 : static_cast<std::size_t>(length);
  return tr;
}

}  // namespace

SampleTrace supervised_trace(Graph& g, model::Model& m, const Example& ex, double alpha, const LossFlags& flags,
                             double loss_scale, bool measure_length) {
  Var objective;
  SampleTrace tr = run_trace(g, m, ex, alpha, flags, loss_scale != 0.0 ? &objective : nullptr, measure_length);
  if (loss_scale != 0.0 && tr.zero_weight_steps < tr.labels.size()) {
    diff::backward(g, diff::scale(objective, loss_scale));
  }
  return tr;
}

Var supervised_loss(Graph& g, model::Model& m, const Example& ex, double alpha, const LossFlags& flags,
                    SampleTrace* trace) {
  Var objective;
  SampleTrace tr = run_trace(g, m, ex, alpha, flags, &objective, false);
  if (trace != nullptr) *trace = std::move(tr);
  return objective;
}

BatchOutcome supervised_batch(model::Model& m, std::span<const Example* const> batch, rewards::AlphaState& alpha,
                              const TrainConfig& cfg) {
  if (batch.empty()) throw ContractError("supervised_batch: empty batch");
  Graph g;
  BatchOutcome out;
  const double scale = cfg.flags.loss_sum ? 1.0 : 1.0 / static_cast<double>(batch.size());
  double len = 0.0;
  guarded(batch, [&] {
    for (const Example* ex : batch) {
      const SampleTrace tr = supervised_trace(g, m, *ex, alpha.alpha, cfg.flags, scale);
      out.loss += tr.loss;
      if (tr.failed) out.fail_ids.push_back(ex->sample->sample_id);
      out.t_hats.push_back(tr.t_hat);
      out.zero_weight_steps += tr.zero_weight_steps;
      len += static_cast<double>(tr.list_length);
    }
  });
  out.loss *= scale;
  out.mean_list_len = len / static_cast<double>(batch.size());
  if (!std::isfinite(out.loss) || !m.params.grads_finite()) numeric_abort(batch, "non-finite loss");
  diff::adam_step(m.params, {.learning_rate = cfg.learning_rate});
  out.e = static_cast<double>(out.fail_ids.size()) / static_cast<double>(batch.size());
  if (m.config.use_eor) alpha = rewards::alpha_update(alpha, out.e);
  return out;
}

std::vector<double> rl_rewards(const world::Sample& s, std::span<const int> actions, std::size_t eor_index,
                               double alpha, bool scr_after_append) {
  std::vector<double> r;
  std::vector<double> list_cr;
  bool found = false;
  const double gt_cr = s.gt_cr();
  for (int a : actions) {
    if (static_cast<std::size_t>(a) == eor_index) {
      r.push_back(0.0);
      break;
    }
    if (!found) {
      std::vector<double> seen = list_cr;
      if (scr_after_append) seen.push_back(s.cr[static_cast<std::size_t>(a)]);
      r.push_back(rewards::scr(gt_cr, seen));
    } else {
      r.push_back(-alpha);
    }
    list_cr.push_back(s.cr[static_cast<std::size_t>(a)]);
    if (a == s.gt_index) found = true;
  }
  return r;
}

Var rl_surrogate(Graph& g, model::Model& m, const Example& ex, double alpha, double lambda, Rng& rng,
                 Episode& ep, const std::vector<int>* frozen, bool scr_after_append, double baseline) {
  const world::Sample& s = *ex.sample;
  g.clear();
  const auto rep = features::assemble(g, m.params, m.fp, m.config.features, ex.inputs);
  const auto enc = model::encode(g, m, rep);
  std::vector<Var> probs;
  ep = Episode{};
  if (frozen != nullptr) {
    std::vector<int> selected;
    for (int a : *frozen) {
      probs.push_back(model::decode_step(g, m, enc, selected));
      ep.actions.push_back(a);
      if (static_cast<std::size_t>(a) == enc.n) break;
      selected.push_back(a);
    }
  } else {
    auto st = model::sample_decode(g, m, enc, rng, s.gt_index);
    probs = st.prob_vars;
    ep.actions = st.actions;
  }
  ep.rewards = rl_rewards(s, ep.actions, enc.n, alpha, scr_after_append);
  ep.returns = rewards::discounted_returns(ep.rewards, lambda);
  for (std::size_t t = 0; t < ep.actions.size(); ++t) {
    if (ep.actions[t] == s.gt_index) ep.t_hat = static_cast<int>(t) + 1;
  }
  ep.failed = ep.t_hat == kNoStep;
  std::vector<Var> terms;
  for (std::size_t t = 0; t < ep.actions.size(); ++t) {
    const double q = ep.returns[t] - baseline;
    Var lp = diff::log(diff::pick(probs[t], 0, static_cast<std::size_t>(ep.actions[t])));
    terms.push_back(diff::scale(lp, -q));
  }
  return sum_terms(terms);
}

BatchOutcome rl_batch(model::Model& m, std::span<const Example* const> batch, rewards::AlphaState& alpha,
                      const TrainConfig& cfg, std::uint64_t batch_seed) {
  if (batch.empty()) throw ContractError("rl_batch: empty batch");
  Graph g;
  BatchOutcome out;
  const double scale = cfg.flags.loss_sum ? 1.0 : 1.0 / static_cast<double>(batch.size());
  std::vector<Episode> episodes(batch.size());
  double baseline = 0.0;
  double len = 0.0;
  guarded(batch, [&] {
    if (cfg.rl_baseline) {
      Graph probe(false);
      for (std::size_t i = 0; i < batch.size(); ++i) {
        Rng rng = Rng::stream(batch_seed, static_cast<std::uint64_t>(batch[i]->sample->sample_id));
        rl_surrogate(probe, m, *batch[i], alpha.alpha, cfg.lambda, rng, episodes[i], nullptr,
                     cfg.flags.scr_after_append);
        baseline += episodes[i].returns.empty() ? 0.0 : episodes[i].returns.front();
      }
      baseline /= static_cast<double>(batch.size());
    }
    for (std::size_t i = 0; i < batch.size(); ++i) {
      Rng rng = Rng::stream(batch_seed, static_cast<std::uint64_t>(batch[i]->sample->sample_id));
      const std::vector<int> frozen = episodes[i].actions;
      Episode ep;
      Var loss = rl_surrogate(g, m, *batch[i], alpha.alpha, cfg.lambda, rng, ep,
                              cfg.rl_baseline ? &frozen : nullptr, cfg.flags.scr_after_append, baseline);
      out.loss += loss.item();
      diff::backward(g, diff::scale(loss, scale));
      if (ep.failed) out.fail_ids.push_back(batch[i]->sample->sample_id);
      out.t_hats.push_back(ep.t_hat);
      std::size_t items = 0;
      for (int a : ep.actions) items += static_cast<std::size_t>(a) == batch[i]->inputs.route.rows() ? 0 : 1;
      len += static_cast<double>(items);
    }
  });
  out.loss *= scale;
  out.mean_list_len = len / static_cast<double>(batch.size());
  if (!std::isfinite(out.loss) || !m.params.grads_finite()) numeric_abort(batch, "non-finite loss");
  diff::adam_step(m.params, {.learning_rate = cfg.learning_rate});
  out.e = static_cast<double>(out.fail_ids.size()) / static_cast<double>(batch.size());
  if (m.config.use_eor) alpha = rewards::alpha_update(alpha, out.e);
  return out;
}

std::string log_csv_header() { return "step,epoch,loss,e,alpha,mean_list_len,eval_mrr,eval_lcr3"; }

std::string log_csv_row(const LogRow& r) {
  std::ostringstream o;
  o.precision(17);
  o << r.step << ',' << r.epoch << ',' << r.loss << ',' << r.e << ',' << r.alpha << ',' << r.mean_list_len << ',';
  if (r.eval_mrr) o << *r.eval_mrr;
  o << ',';
  if (r.eval_lcr3) o << *r.eval_lcr3;
  return o.str();
}

namespace {

std::pair<double, double> quick_eval(model::Model& m, const std::vector<world::Sample>& eval) {
  Graph g(false);
  std::vector<int> ranks;
  double lcr3 = 0.0;
  for (const auto& s : eval) {
    const auto st = model::infer(g, m, s);
    ranks.push_back(evalkit::rank_of(st.selected, s.gt_index));
    lcr3 += evalkit::lcr_at_k(st.selected, s.cr, 3);
  }
  return {evalkit::mrr(ranks), eval.empty() ? 0.0 : lcr3 / static_cast<double>(eval.size())};
}

diff::NamedTensor state_tensor(std::size_t epoch, std::size_t step, const rewards::AlphaState& a, double best) {
  return {"train.state", diff::Tensor(1, 7, {static_cast<double>(epoch), static_cast<double>(step), a.alpha, a.eta,
                                             a.beta, best, a.last_e})};
}

}  // namespace

TrainResult run_training(const TrainConfig& cfg, const std::vector<world::Sample>& train,
                         const std::vector<world::Sample>& eval, const RunOptions& opt) {
  cfg.validate();
  if (train.empty()) throw ConfigError("training set is empty");
  TrainResult res;
  res.alpha = rewards::AlphaState{cfg.alpha, cfg.eta, cfg.beta, 0.0};
  std::size_t start_epoch = 0;
  std::size_t step = 0;
  const bool write = !opt.out_dir.empty();
  const auto last_path = opt.out_dir / "last.ckpt";
  const auto log_path = opt.out_dir / "train_log.csv";

  if (opt.resume && write && std::filesystem::exists(last_path)) {
    std::vector<diff::NamedTensor> entries;
    res.model = model::load_model(last_path, &entries);
    const diff::Tensor* st = diff::find_tensor(entries, "train.state");
    if (st == nullptr || st->size() != 7) throw IoError("checkpoint " + last_path.string() + " lacks training state");
    start_epoch = static_cast<std::size_t>((*st)[0]);
    step = static_cast<std::size_t>((*st)[1]);
    res.alpha = rewards::AlphaState{(*st)[2], (*st)[3], (*st)[4], (*st)[6]};
    res.best_mrr = (*st)[5];
  } else {
    auto stats = features::fit_zscore(train);
    res.model = model::make_model(cfg.model, stats.widths, cfg.seed);
    res.model.stats = std::move(stats);
  }
  model::Model& m = res.model;

  std::ofstream log;
  if (write) {
    std::filesystem::create_directories(opt.out_dir);
    std::vector<std::string> kept;
    if (opt.resume && std::filesystem::exists(log_path)) {
      // Keep the header block and the rows covered by the checkpoint.
      std::ifstream in(log_path);
      std::string line;
      std::size_t idx = 0;
      while (std::getline(in, line)) {
        if (idx++ < 3) {
          kept.push_back(line);
        } else if (std::stoull(line.substr(0, line.find(','))) <= step) {
          kept.push_back(line);
        }
      }
    }
    log.open(log_path, std::ios::trunc);
    if (!log) throw IoError("cannot write " + log_path.string());
    if (kept.size() >= 3) {
      for (const auto& l : kept) log << l << '\n';
    } else {
      log << util::timestamp_line() << '\n' << util::config_line(opt.config_json) << '\n' << log_csv_header() << '\n';
    }
    log.flush();
  }

  const auto examples = prepare_examples(train, m.stats);
  std::vector<std::size_t> order(examples.size());
  auto emit = [&](const LogRow& row) {
    res.log.push_back(row);
    if (write) {
      log << log_csv_row(row) << '\n';
      log.flush();
    }
    if (opt.on_row) opt.on_row(row);
  };
  auto evaluate_now = [&](LogRow& row) {
    if (eval.empty()) return;
    const auto [mrr, lcr3] = quick_eval(m, eval);
    row.eval_mrr = mrr;
    row.eval_lcr3 = lcr3;
    if (mrr > res.best_mrr) {
      res.best_mrr = mrr;
      if (write) {
        model::save_model(opt.out_dir / "best.ckpt", m, false,
                          {state_tensor(row.epoch, row.step, res.alpha, res.best_mrr)});
      }
    }
  };

  for (std::size_t epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffler = Rng::stream(cfg.seed, 0x5348554646ull + epoch);
    shuffler.shuffle(std::span<std::size_t>(order));
    std::vector<const Example*> batch;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      batch.clear();
      const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      for (std::size_t i = begin; i < end; ++i) batch.push_back(&examples[order[i]]);
      ++step;
      const BatchOutcome out = cfg.rl ? rl_batch(m, batch, res.alpha, cfg, Rng::stream(cfg.seed, step).next())
                                      : supervised_batch(m, batch, res.alpha, cfg);
      LogRow row{step, epoch + 1, out.loss, out.e, res.alpha.alpha, out.mean_list_len, std::nullopt, std::nullopt};
      const bool epoch_end = end == order.size();
      if ((cfg.eval_every > 0 && step % cfg.eval_every == 0) || epoch_end) evaluate_now(row);
      emit(row);
    }
    if (write) model::save_model(last_path, m, true, {state_tensor(epoch + 1, step, res.alpha, res.best_mrr)});
  }
  if (write) model::save_model(opt.out_dir / "final.ckpt", m, false, {state_tensor(cfg.epochs, step, res.alpha, res.best_mrr)});
  return res;
}

}  // namespace scasrec::trainer
