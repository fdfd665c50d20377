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

#include "scasrec/cli/run_config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "scasrec/errors.hpp"

namespace scasrec::cli {

using nlohmann::json;

namespace {

template <typename T>
T get(const json& j, const std::string& key) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key '" + key + "' has the wrong type: " + j.dump());
  }
}

std::size_t get_count(const json& j, const std::string& key) {
  if (!j.is_number_integer() || j.get<long long>() < 0) {
    throw ConfigError("config key '" + key + "' must be a non-negative integer, got " + j.dump());
  }
  return j.get<std::size_t>();
}

}  // namespace

void RunConfig::validate() const {
  train.validate();
  if (ks.empty()) throw ConfigError("k list is empty");
  for (int k : ks) {
    if (k < 1) throw ConfigError("every K must be >= 1");
  }
  if (!(mmr_lambda >= 0.0 && mmr_lambda <= 1.0)) throw ConfigError("mmr_lambda must be in [0, 1]");
  if (dnn_epochs == 0 || dnn_hidden == 0) throw ConfigError("dnn_epochs and dnn_hidden must be positive");
  for (double b : beta_grid) {
    if (!(b >= 0.0 && b <= 1.0)) throw ConfigError("beta_grid entries must be in [0, 1]");
  }
}

RunConfig default_run_config() {
  RunConfig c;
  if (const char* env = std::getenv("SCASREC_SEED"); env != nullptr && *env != '\0') {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end == env || *end != '\0') throw ConfigError(std::string("SCASREC_SEED is not an integer: ") + env);
    c.train.seed = v;
  }
  return c;
}

void apply_json(RunConfig& c, const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  auto& t = c.train;
  auto& mc = t.model;
  auto& fc = mc.features;
  for (const auto& [key, v] : j.items()) {
    if (key == "batch_size") t.batch_size = get_count(v, key);
    else if (key == "learning_rate") t.learning_rate = get<double>(v, key);
    else if (key == "epochs") t.epochs = get_count(v, key);
    else if (key == "alpha") t.alpha = get<double>(v, key);
    else if (key == "eta") t.eta = get<double>(v, key);
    else if (key == "beta") t.beta = get<double>(v, key);
    else if (key == "lambda") t.lambda = get<double>(v, key);
    else if (key == "rl") t.rl = get<bool>(v, key);
    else if (key == "rl_baseline") t.rl_baseline = get<bool>(v, key);
    else if (key == "eval_every") t.eval_every = get_count(v, key);
    else if (key == "seed") t.seed = get<std::uint64_t>(v, key);
    else if (key == "disable_scr") t.flags.disable_scr = get<bool>(v, key);
    else if (key == "disable_eor") mc.use_eor = !get<bool>(v, key);
    else if (key == "scr_after_append") t.flags.scr_after_append = get<bool>(v, key);
    else if (key == "reward_floor") t.flags.reward_floor = get<double>(v, key);
    else if (key == "loss_sum") t.flags.loss_sum = get<bool>(v, key);
    else if (key == "model_width") fc.model_width = get_count(v, key);
    else if (key == "history_width") fc.history_width = get_count(v, key);
    else if (key == "din_hidden") fc.din_hidden = get_count(v, key);
    else if (key == "scene_width") fc.scene_width = get_count(v, key);
    else if (key == "time_embedding") fc.time_embedding = get_count(v, key);
    else if (key == "softmax_history") fc.softmax_history = get<bool>(v, key);
    else if (key == "head_hidden") mc.head_hidden = get_count(v, key);
    else if (key == "max_steps") mc.max_steps = get_count(v, key);
    else if (key == "keep_start") mc.keep_start = get<bool>(v, key);
    else if (key == "train_data") c.train_data = get<std::string>(v, key);
    else if (key == "eval_data") c.eval_data = get<std::string>(v, key);
    else if (key == "out") c.out = get<std::string>(v, key);
    else if (key == "methods") c.methods = get<std::vector<std::string>>(v, key);
    else if (key == "ks") c.ks = get<std::vector<int>>(v, key);
    else if (key == "mmr_lambda") c.mmr_lambda = get<double>(v, key);
    else if (key == "truncate_to_model_len") c.truncate_to_model_len = get<bool>(v, key);
    else if (key == "dnn_epochs") c.dnn_epochs = get_count(v, key);
    else if (key == "dnn_hidden") c.dnn_hidden = get_count(v, key);
    else if (key == "beta_grid") c.beta_grid = get<std::vector<double>>(v, key);
    else throw ConfigError("unknown config key '" + key + "'");
  }
}

void apply_json_file(RunConfig& c, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::ostringstream text;
  text << in.rdbuf();
  apply_json(c, text.str());
}

std::string to_json(const RunConfig& c) {
  const auto& t = c.train;
  const auto& mc = t.model;
  const auto& fc = mc.features;
  const json j = {
      {"batch_size", t.batch_size},
      {"learning_rate", t.learning_rate},
      {"epochs", t.epochs},
      {"alpha", t.alpha},
      {"eta", t.eta},
      {"beta", t.beta},
      {"lambda", t.lambda},
      {"rl", t.rl},
      {"rl_baseline", t.rl_baseline},
      {"eval_every", t.eval_every},
      {"seed", t.seed},
      {"disable_scr", t.flags.disable_scr},
      {"disable_eor", !mc.use_eor},
      {"scr_after_append", t.flags.scr_after_append},
      {"reward_floor", t.flags.reward_floor},
      {"loss_sum", t.flags.loss_sum},
      {"model_width", fc.model_width},
      {"history_width", fc.history_width},
      {"din_hidden", fc.din_hidden},
      {"scene_width", fc.scene_width},
      {"time_embedding", fc.time_embedding},
      {"softmax_history", fc.softmax_history},
      {"head_hidden", mc.head_hidden},
      {"max_steps", mc.max_steps},
      {"keep_start", mc.keep_start},
      {"train_data", c.train_data},
      {"eval_data", c.eval_data},
      {"out", c.out},
      {"methods", c.methods},
      {"ks", c.ks},
      {"mmr_lambda", c.mmr_lambda},
      {"truncate_to_model_len", c.truncate_to_model_len},
      {"dnn_epochs", c.dnn_epochs},
      {"dnn_hidden", c.dnn_hidden},
      {"beta_grid", c.beta_grid},
  };
  return j.dump();
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoi(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("not an integer list: " + text);
    }
  }
  if (out.empty()) throw ConfigError("empty integer list");
  return out;
}

std::vector<std::string> parse_name_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  if (out.empty()) throw ConfigError("empty name list");
  return out;
}

}  // namespace scasrec::cli
