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
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "scasrec/cli/gradcheck_suite.hpp"
#include "scasrec/cli/run_config.hpp"
#include "scasrec/errors.hpp"
#include "scasrec/evalkit/evalkit.hpp"
#include "scasrec/trainer/trainer.hpp"
#include "scasrec/util/provenance.hpp"
#include "scasrec/world/dataset.hpp"

namespace fs = std::filesystem;
using namespace scasrec;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheck = 1;
constexpr int kExitConfig = 2;

// Flags shared by train, eval and ablate. Unset optionals leave the config value alone.
struct RunFlags {
  std::string config_path;
  std::optional<std::string> data, eval_data, out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs, eval_every;
  std::optional<double> beta, alpha, eta, reward_floor;
  bool rl = false, rl_baseline = false, disable_scr = false, disable_eor = false;
  bool scr_after_append = false, loss_sum = false, truncate = false;
  std::optional<std::string> methods, ks;

  void add_training(CLI::App* app) {
    app->add_option("--config", config_path, "JSON run configuration");
    app->add_option("--data", data, "training dataset");
    app->add_option("--eval-data", eval_data, "held-out dataset for periodic evaluation");
    app->add_option("--out", out, "output directory");
    app->add_option("--seed", seed, "training seed");
    app->add_option("--epochs", epochs);
    app->add_option("--eval-every", eval_every, "batches between evaluations (0: epoch ends only)");
    app->add_option("--beta", beta, "target failure ratio");
    app->add_option("--alpha", alpha, "initial EOR weight");
    app->add_option("--eta", eta, "alpha step size");
    app->add_option("--reward-floor", reward_floor, "lower bound on ground-truth step weights");
    app->add_flag("--rl", rl, "REINFORCE instead of the supervised loss");
    app->add_flag("--rl-baseline", rl_baseline, "subtract the batch-mean return");
    app->add_flag("--disable-scr", disable_scr, "ground-truth steps weighted 1");
    app->add_flag("--disable-eor", disable_eor, "no EOR token or EOR supervision");
    app->add_flag("--scr-after-append", scr_after_append, "SCR list includes the item appended at step t");
    app->add_flag("--loss-sum", loss_sum, "sum the loss over the batch instead of averaging");
  }

  cli::RunConfig resolve() const {
    cli::RunConfig c = cli::default_run_config();
    if (!config_path.empty()) cli::apply_json_file(c, config_path);
    auto& t = c.train;
    if (data) c.train_data = *data;
    if (eval_data) c.eval_data = *eval_data;
    if (out) c.out = *out;
    if (seed) t.seed = *seed;
    if (epochs) t.epochs = *epochs;
    if (eval_every) t.eval_every = *eval_every;
    if (beta) t.beta = *beta;
    if (alpha) t.alpha = *alpha;
    if (eta) t.eta = *eta;
    if (reward_floor) t.flags.reward_floor = *reward_floor;
    if (rl) t.rl = true;
    if (rl_baseline) t.rl_baseline = true;
    if (disable_scr) t.flags.disable_scr = true;
    if (disable_eor) t.model.use_eor = false;
    if (scr_after_append) t.flags.scr_after_append = true;
    if (loss_sum) t.flags.loss_sum = true;
    if (truncate) c.truncate_to_model_len = true;
    if (methods) c.methods = cli::parse_name_list(*methods);
    if (ks) c.ks = cli::parse_int_list(*ks);
    c.validate();
    return c;
  }
};

std::vector<world::Sample> load(const std::string& path, const char* what) {
  if (path.empty()) throw ConfigError(std::string("no ") + what + " dataset given");
  if (!fs::exists(path)) throw IoError(std::string(what) + " dataset not found: " + path);
  return world::read_dataset(path);
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

std::string width_string(const world::FeatureWidths& w) {
  return "route " + std::to_string(w.route) + ", scene " + std::to_string(w.scene) + ", history " +
         std::to_string(w.history);
}

world::FeatureWidths widths_of(const std::vector<world::Sample>& samples) {
  world::FeatureWidths w;
  for (const auto& s : samples) {
    if (s.candidates.empty()) continue;
    w.route = s.candidates.front().features.size();
    w.scene = s.scene.size();
    if (!s.history.empty()) w.history = s.history.front().size();
    return w;
  }
  return w;
}

void check_widths(const model::Model& m, const std::vector<world::Sample>& data, const std::string& path) {
  const auto w = widths_of(data);
  bool history_ok = true;
  for (const auto& s : data) {
    if (!s.history.empty()) {
      history_ok = s.history.front().size() == m.widths.history;
      break;
    }
  }
  if (w.route != m.widths.route || w.scene != m.widths.scene || !history_ok) {
    throw ConfigError("feature widths of " + path + " (" + width_string(w) + ") do not match the checkpoint (" +
                      width_string(m.widths) + ")");
  }
}

evalkit::PointwiseConfig pointwise_config(const cli::RunConfig& c) {
  evalkit::PointwiseConfig p;
  p.features = c.train.model.features;
  p.hidden = c.dnn_hidden;
  p.epochs = c.dnn_epochs;
  p.batch_size = c.train.batch_size;
  p.learning_rate = c.train.learning_rate;
  p.seed = c.train.seed;
  return p;
}

bool needs_scores(const std::vector<std::string>& methods) {
  for (const auto& m : methods) {
    if (m == "dnn" || m == "mmr" || m == "dpp") return true;
  }
  return false;
}

std::string report_text(const cli::RunConfig& c, const std::vector<evalkit::MetricsReport>& reports) {
  std::string text = util::timestamp_line() + "\n" + util::config_line(cli::to_json(c)) + "\n" +
                     evalkit::report_csv_header(c.ks) + "\n";
  for (const auto& r : reports) text += evalkit::report_csv_row(r) + "\n";
  return text;
}

// ---- gen-data ----

struct GenFlags {
  std::vector<int> grid = {12, 12};
  std::size_t samples = 20000;
  int candidates = 10;
  int history = 8;
  int users = 400;
  double noise = 0.05;
  double deviation = 0.1;
  double choice_noise = 1.0;
  std::optional<std::uint64_t> seed;
  std::int64_t first_id = 0;
  std::string out;
};

int cmd_gen_data(const GenFlags& f) {
  world::WorldConfig c;
  if (f.grid.size() != 2) throw ConfigError("--grid takes W H");
  c.grid_width = f.grid[0];
  c.grid_height = f.grid[1];
  c.max_candidates = f.candidates;
  c.history_length = f.history;
  c.users = f.users;
  c.deviation = f.deviation;
  c.noise = f.noise;
  c.choice_noise = f.choice_noise;
  c.seed = f.seed ? *f.seed : cli::default_run_config().train.seed;
  c.validate();
  if (f.out.empty()) throw ConfigError("--out is required");
  if (f.first_id < 0) throw ConfigError("--first-id must be >= 0");
  const auto samples = world::generate_dataset(c, f.first_id, f.samples);
  if (fs::path(f.out).has_parent_path()) fs::create_directories(fs::path(f.out).parent_path());
  world::write_dataset(samples, f.out);
  std::cout << "wrote " << samples.size() << " samples to " << f.out << "\n";
  return kExitOk;
}

// ---- train ----

int cmd_train(const RunFlags& flags, bool resume) {
  const cli::RunConfig c = flags.resolve();
  if (c.out.empty()) throw ConfigError("--out is required");
  const auto train = load(c.train_data, "training");
  const std::vector<world::Sample> eval = c.eval_data.empty() ? std::vector<world::Sample>{}
                                                              : load(c.eval_data, "evaluation");
  trainer::RunOptions opt;
  opt.out_dir = c.out;
  opt.resume = resume;
  opt.config_json = cli::to_json(c);
  opt.on_row = [](const trainer::LogRow& r) {
    if (r.eval_mrr) {
      std::cout << "step " << r.step << " epoch " << r.epoch << " loss " << r.loss << " alpha " << r.alpha
                << " len " << r.mean_list_len << " eval_mrr " << *r.eval_mrr << " eval_lcr3 " << *r.eval_lcr3
                << std::endl;
    }
  };
  const auto res = trainer::run_training(c.train, train, eval, opt);
  write_text(fs::path(c.out) / "config.json", cli::to_json(c) + "\n");
  std::cout << "final alpha " << res.alpha.alpha << "; checkpoints in " << c.out << "\n";
  return kExitOk;
}

// ---- eval ----

int cmd_eval(const RunFlags& flags, const std::string& ckpt, std::optional<double> alpha_override) {
  cli::RunConfig c = flags.resolve();
  const auto eval = load(c.eval_data, "evaluation");
  const bool want_model = c.truncate_to_model_len ||
                          std::find(c.methods.begin(), c.methods.end(), "scasrec") != c.methods.end();
  std::optional<model::Model> m;
  double alpha = c.train.alpha;
  if (want_model) {
    if (ckpt.empty()) throw ConfigError("--ckpt is required for method scasrec");
    if (!fs::exists(ckpt)) throw IoError("checkpoint not found: " + ckpt);
    std::vector<diff::NamedTensor> entries;
    m = model::load_model(ckpt, &entries);
    check_widths(*m, eval, c.eval_data);
    if (const auto* st = diff::find_tensor(entries, "train.state"); st != nullptr && st->size() == 7) alpha = (*st)[2];
  }
  if (alpha_override) alpha = *alpha_override;
  std::optional<evalkit::PointwiseModel> dnn;
  if (needs_scores(c.methods)) {
    if (c.train_data.empty()) throw ConfigError("methods dnn/mmr/dpp need --train-data for the pointwise baseline");
    dnn = evalkit::train_pointwise(load(c.train_data, "training"), pointwise_config(c));
  }
  evalkit::EvalOptions opt;
  opt.ks = c.ks;
  opt.alpha = alpha;
  opt.mmr_lambda = c.mmr_lambda;
  opt.truncate_to_model_len = c.truncate_to_model_len;
  opt.seed = c.train.seed;
  c.train.alpha = alpha;
  const auto reports = evalkit::evaluate(c.methods, eval, m ? &*m : nullptr, dnn ? &*dnn : nullptr, opt);
  const std::string text = report_text(c, reports);
  if (c.out.empty()) {
    std::cout << text;
  } else {
    write_text(c.out, text);
    std::cout << text.substr(text.find('\n', text.find('\n') + 1) + 1);
  }
  return kExitOk;
}

// ---- ablate ----

int cmd_ablate(const RunFlags& flags) {
  const cli::RunConfig base = flags.resolve();
  if (base.out.empty()) throw ConfigError("--out is required");
  const auto train = load(base.train_data, "training");
  const auto eval = load(base.eval_data, "evaluation");

  struct Variant {
    std::string name;
    cli::RunConfig config;
  };
  std::vector<Variant> grid;
  auto variant = [&](const std::string& name, bool no_scr, bool no_eor, std::optional<double> beta) {
    cli::RunConfig c = base;
    c.train.flags.disable_scr = no_scr;
    c.train.model.use_eor = !no_eor;
    if (beta) c.train.beta = *beta;
    c.out = (fs::path(base.out) / name).string();
    grid.push_back({name, c});
  };
  variant("full", false, false, std::nullopt);
  variant("no_scr", true, false, std::nullopt);
  variant("no_eor", false, true, std::nullopt);
  variant("no_scr_no_eor", true, true, std::nullopt);
  for (double b : base.beta_grid) {
    std::ostringstream name;
    name << "beta_" << b;
    variant(name.str(), false, false, b);
  }

  std::vector<evalkit::MetricsReport> reports;
  for (auto& v : grid) {
    std::cout << "== " << v.name << std::endl;
    trainer::RunOptions opt;
    opt.out_dir = v.config.out;
    opt.config_json = cli::to_json(v.config);
    auto res = trainer::run_training(v.config.train, train, eval, opt);
    evalkit::EvalOptions eo;
    eo.ks = base.ks;
    eo.alpha = res.alpha.alpha;
    auto r = evalkit::evaluate({"scasrec"}, eval, &res.model, nullptr, eo).front();
    r.method = v.name;
    std::cout << evalkit::report_csv_row(r) << std::endl;
    reports.push_back(r);
  }
  write_text(fs::path(base.out) / "ablation.csv", report_text(base, reports));
  return kExitOk;
}

// ---- gradcheck ----

int cmd_gradcheck(const std::string& seeds, const std::string& corrupt) {
  bool ok = true;
  std::cout << "component,seed,max_rel_error,worst,result\n";
  for (int seed : cli::parse_int_list(seeds)) {
    for (const auto& r : cli::run_gradcheck_suite(static_cast<std::uint64_t>(seed), corrupt)) {
      std::cout << r.component << ',' << seed << ',' << r.max_rel_error << ',' << r.worst << ','
                << (r.pass ? "PASS" : "FAIL") << "\n";
      ok = ok && r.pass;
    }
  }
  std::cout << (ok ? "gradcheck PASS" : "gradcheck FAIL") << std::endl;
  return ok ? kExitOk : kExitCheck;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Generative route-list recommendation: data, training, evaluation and checks"};
  app.require_subcommand(1);

  GenFlags gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "generate a synthetic dataset");
  gen_cmd->add_option("--grid", gen.grid, "grid width and height")->expected(2);
  gen_cmd->add_option("--samples", gen.samples);
  gen_cmd->add_option("--candidates", gen.candidates, "maximum candidates per query");
  gen_cmd->add_option("--history", gen.history, "history records per sample");
  gen_cmd->add_option("--users", gen.users);
  gen_cmd->add_option("--noise", gen.noise, "fraction of relabeled (misclicked) samples");
  gen_cmd->add_option("--deviation", gen.deviation, "trajectory deviation rate");
  gen_cmd->add_option("--choice-noise", gen.choice_noise, "Gumbel scale of the user choice");
  gen_cmd->add_option("--seed", gen.seed);
  gen_cmd->add_option("--first-id", gen.first_id, "first sample id (disjoint ranges give disjoint splits)");
  gen_cmd->add_option("--out", gen.out)->required();

  RunFlags train_flags;
  bool resume = false;
  auto* train_cmd = app.add_subcommand("train", "train the model");
  train_flags.add_training(train_cmd);
  train_cmd->add_flag("--resume", resume, "continue from <out>/last.ckpt");

  RunFlags eval_flags;
  std::string ckpt;
  std::optional<double> eval_alpha;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint and baselines");
  eval_cmd->add_option("--config", eval_flags.config_path);
  eval_cmd->add_option("--ckpt", ckpt);
  eval_cmd->add_option("--data", eval_flags.eval_data, "evaluation dataset");
  eval_cmd->add_option("--train-data", eval_flags.data, "training dataset for the pointwise baseline");
  eval_cmd->add_option("--methods", eval_flags.methods, "comma list of scasrec,dnn,mmr,dpp,oracle,random");
  eval_cmd->add_option("--k", eval_flags.ks, "comma list of cutoffs");
  eval_cmd->add_option("--out", eval_flags.out, "report CSV");
  eval_cmd->add_option("--seed", eval_flags.seed);
  eval_cmd->add_option("--alpha", eval_alpha, "redundancy weight of F (default: the checkpoint's alpha)");
  eval_cmd->add_flag("--truncate-to-model-len", eval_flags.truncate, "cut baselines to the model's list length");

  RunFlags ablate_flags;
  auto* ablate_cmd = app.add_subcommand("ablate", "run the ablation and beta grids");
  ablate_flags.add_training(ablate_cmd);

  std::string seeds = "1,2,3";
  std::string corrupt;
  auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference check of every differentiable component");
  grad_cmd->add_option("--seeds", seeds);
  grad_cmd->add_option("--corrupt", corrupt, "perturb one component's analytic gradient");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*gen_cmd) return cmd_gen_data(gen);
    if (*train_cmd) return cmd_train(train_flags, resume);
    if (*eval_cmd) return cmd_eval(eval_flags, ckpt, eval_alpha);
    if (*ablate_cmd) return cmd_ablate(ablate_flags);
    if (*grad_cmd) return cmd_gradcheck(seeds, corrupt);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const VersionError& e) {
    std::cerr << "version error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitCheck;
  }
  return kExitConfig;
}
