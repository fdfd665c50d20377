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

#include "scasrec/world/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "json.hpp"
#include "scasrec/errors.hpp"
#include "scasrec/rng.hpp"

namespace scasrec::world {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr std::uint64_t kUserStream = 1ull << 40;
constexpr std::uint64_t kSampleStream = 1ull << 41;
constexpr std::uint64_t kNoiseSalt = 0x6E6F697365ull;

// Route-feature slots that carry user preference.
constexpr std::size_t kEta = 0, kToll = 2, kLights = 3, kTurns = 5, kKm = 23;

struct User {
  std::vector<double> weights;
  std::vector<std::vector<double>> history;
};

double quantize(double v) { return std::round(v * 1000.0) / 1000.0; }

void set_if(std::vector<double>& v, std::size_t i, double x) {
  if (i < v.size()) v[i] = x;
}

std::vector<double> make_scene(Rng& rng, const RoadGraph& graph, int origin, int destination,
                               std::size_t candidates, std::size_t width) {
  const int bucket = 1 + static_cast<int>(rng.index(kTimeBuckets));
  const int steps = graph.manhattan(origin, destination);
  const double raw[] = {
      static_cast<double>(bucket),                        // request-time bucket (discrete)
      rng.uniform(),                                      // origin familiarity
      rng.uniform(),                                      // destination familiarity
      rng.bernoulli(5.0 / 7.0) ? 1.0 : 0.0,               // weekday
      steps * 0.35,                                       // rough OD distance (km)
      (4.0 * (bucket - 1) + rng.uniform(0.0, 4.0)) / 24.0,  // hour of day / 24
      rng.bernoulli(0.15) ? 1.0 : 0.0,                    // rain
      static_cast<double>(candidates),                    // recall size
      static_cast<double>(steps),                         // OD grid steps
      0.0,
  };
  std::vector<double> scene(width, 0.0);
  for (std::size_t i = 0; i < std::min(width, std::size(raw)); ++i) scene[i] = quantize(raw[i]);
  return scene;
}

// Scene-conditioned preference: rush hour amplifies time sensitivity,
// familiar users tolerate complex routes, rain lowers toll aversion.
std::vector<double> effective_weights(const std::vector<double>& base, const std::vector<double>& scene) {
  std::vector<double> w = base;
  auto at = [&](std::size_t i) { return i < scene.size() ? scene[i] : 0.0; };
  const int bucket = static_cast<int>(at(0));
  if (bucket == 2 || bucket == 4) set_if(w, kEta, (kEta < w.size() ? w[kEta] : 0.0) * 1.6);
  if (0.5 * (at(1) + at(2)) > 0.6) {
    if (kTurns < w.size()) w[kTurns] *= 0.3;
    if (kLights < w.size()) w[kLights] *= 0.5;
  }
  if (at(6) > 0.5 && kToll < w.size()) w[kToll] *= 0.5;
  return w;
}

std::pair<int, int> random_od(Rng& rng, const RoadGraph& graph) {
  const int min_steps = std::max(2, (graph.width() + graph.height()) / 3);
  const int nodes = graph.node_count();
  for (int attempt = 0; attempt < 1000; ++attempt) {
    const int o = static_cast<int>(rng.index(static_cast<std::size_t>(nodes)));
    const int d = static_cast<int>(rng.index(static_cast<std::size_t>(nodes)));
    if (o != d && graph.manhattan(o, d) >= std::min(min_steps, graph.width() + graph.height() - 2)) return {o, d};
  }
  return {0, nodes - 1};
}

User make_user(const WorldConfig& cfg, const RoadGraph& graph, std::size_t user_id) {
  Rng rng = Rng::stream(cfg.seed, kUserStream + user_id);
  User user;
  user.weights.assign(cfg.widths.route, 0.0);
  set_if(user.weights, kEta, -rng.uniform(0.6, 1.6) / 60.0);
  set_if(user.weights, kToll, -rng.uniform(0.0, 1.5));
  set_if(user.weights, kLights, -rng.uniform(0.0, 0.4));
  set_if(user.weights, kTurns, -rng.uniform(0.0, 0.3));
  set_if(user.weights, kKm, -rng.uniform(0.0, 0.3));
  const std::size_t route_part = cfg.widths.history - cfg.widths.scene;
  for (int h = 0; h < cfg.history_length; ++h) {
    const auto [o, d] = random_od(rng, graph);
    const auto cands = generate_candidates(graph, o, d, cfg.max_candidates, rng.next(), cfg.widths.route);
    const auto scene = make_scene(rng, graph, o, d, cands.routes.size(), cfg.widths.scene);
    const auto w = effective_weights(user.weights, scene);
    const std::size_t pick = simulate_choice(cands.routes, w, rng.next(), cfg.choice_noise);
    std::vector<double> record(cands.routes[pick].features.begin(),
                               cands.routes[pick].features.begin() + static_cast<std::ptrdiff_t>(route_part));
    record.insert(record.end(), scene.begin(), scene.end());
    user.history.push_back(std::move(record));
  }
  return user;
}

[[noreturn]] void bad_line(std::size_t line, const std::string& why) { throw ParseError(line, why); }

}  // namespace

void WorldConfig::validate() const {
  if (grid_width < 2 || grid_height < 2) throw ConfigError("grid must be at least 2x2");
  if (max_candidates < 1) throw ConfigError("--candidates must be >= 1");
  if (history_length < 0) throw ConfigError("history length must be >= 0");
  if (users < 1) throw ConfigError("user pool must be non-empty");
  if (!(deviation >= 0.0 && deviation < 1.0)) throw ConfigError("--deviation must be in [0, 1)");
  if (!(noise >= 0.0 && noise <= 1.0)) throw ConfigError("--noise must be in [0, 1]");
  if (widths.route < 1 || widths.scene < 1) throw ConfigError("feature widths must be positive");
  if (widths.history <= widths.scene || widths.history - widths.scene > widths.route) {
    throw ConfigError("history width must exceed scene width by at most the route width");
  }
}

void label_coverage(Sample& s) {
  s.cr.assign(s.candidates.size(), 0.0);
  s.gt_index = 0;
  for (std::size_t i = 0; i < s.candidates.size(); ++i) {
    s.cr[i] = coverage_rate(s.candidates[i].edge_ids, s.trajectory);
    if (s.cr[i] > s.cr[static_cast<std::size_t>(s.gt_index)]) s.gt_index = static_cast<int>(i);
  }
}

std::vector<Sample> generate_dataset(const WorldConfig& cfg, std::int64_t first_id, std::size_t count) {
  cfg.validate();
  const RoadGraph graph = build_grid_graph(cfg.grid_width, cfg.grid_height, cfg.seed);
  std::vector<User> users;
  users.reserve(static_cast<std::size_t>(cfg.users));
  for (int u = 0; u < cfg.users; ++u) users.push_back(make_user(cfg, graph, static_cast<std::size_t>(u)));

  std::vector<Sample> samples;
  samples.reserve(count);
  const int n_max = cfg.max_candidates;
  const int n_min = n_max >= 2 ? std::max(2, n_max / 2) : 1;
  for (std::size_t k = 0; k < count; ++k) {
    Sample s;
    s.sample_id = first_id + static_cast<std::int64_t>(k);
    Rng rng = Rng::stream(cfg.seed, kSampleStream + static_cast<std::uint64_t>(s.sample_id));
    const User& user = users[rng.index(users.size())];
    const auto [o, d] = random_od(rng, graph);
    const int n = n_min + static_cast<int>(rng.index(static_cast<std::size_t>(n_max - n_min + 1)));
    auto cands = generate_candidates(graph, o, d, n, rng.next(), cfg.widths.route);
    s.candidates = std::move(cands.routes);
    rng.shuffle(std::span<Route>(s.candidates));
    s.scene = make_scene(rng, graph, o, d, s.candidates.size(), cfg.widths.scene);
    const auto w = effective_weights(user.weights, s.scene);
    const std::size_t chosen = simulate_choice(s.candidates, w, rng.next(), cfg.choice_noise);
    s.trajectory = derive_trajectory(graph, s.candidates[chosen], cfg.deviation, rng.next());
    s.history = user.history;
    label_coverage(s);
    samples.push_back(std::move(s));
  }
  if (cfg.noise > 0.0) inject_noise(samples, cfg.noise, cfg.seed);
  return samples;
}

void inject_noise(std::vector<Sample>& samples, double beta_true, std::uint64_t seed) {
  if (!(beta_true >= 0.0 && beta_true <= 1.0)) throw ContractError("inject_noise: beta_true must be in [0, 1]");
  for (auto& s : samples) {
    Rng rng = Rng::stream(seed ^ kNoiseSalt, static_cast<std::uint64_t>(s.sample_id));
    if (!rng.bernoulli(beta_true) || s.candidates.size() < 2) continue;
    std::size_t j = rng.index(s.candidates.size() - 1);
    if (j >= static_cast<std::size_t>(s.gt_index)) ++j;
    std::vector<int> u = s.candidates[j].edge_ids;
    std::sort(u.begin(), u.end());
    s.trajectory = std::move(u);
    label_coverage(s);
    s.is_noisy = true;
  }
}

std::string sample_to_json_line(const Sample& s) {
  ordered_json j;
  j["schema_version"] = kSchemaVersion;
  j["sample_id"] = s.sample_id;
  j["n_candidates"] = s.candidates.size();
  ordered_json cands = ordered_json::array();
  for (const auto& r : s.candidates) {
    ordered_json c;
    c["edge_ids"] = r.edge_ids;
    c["features"] = r.features;
    cands.push_back(std::move(c));
  }
  j["candidates"] = std::move(cands);
  j["scene"] = s.scene;
  j["history"] = s.history;
  j["trajectory_edge_ids"] = s.trajectory;
  j["cr"] = s.cr;
  j["gt_index"] = s.gt_index;
  j["is_noisy"] = s.is_noisy;
  return j.dump();
}

Sample sample_from_json_line(const std::string& line, std::size_t line_number) {
  ordered_json j;
  try {
    j = ordered_json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    bad_line(line_number, std::string("malformed record: ") + e.what());
  }
  if (!j.is_object()) bad_line(line_number, "record is not an object");
  if (!j.contains("schema_version")) bad_line(line_number, "missing schema_version");
  if (!j["schema_version"].is_number_integer() || j["schema_version"].get<int>() != kSchemaVersion) {
    throw VersionError("line " + std::to_string(line_number) + ": schema_version " + j["schema_version"].dump() +
                       " is not supported (expected " + std::to_string(kSchemaVersion) + ")");
  }
  Sample s;
  try {
    s.sample_id = j.at("sample_id").get<std::int64_t>();
    const auto n = j.at("n_candidates").get<std::size_t>();
    for (const auto& c : j.at("candidates")) {
      Route r;
      r.edge_ids = c.at("edge_ids").get<std::vector<int>>();
      r.features = c.at("features").get<std::vector<double>>();
      s.candidates.push_back(std::move(r));
    }
    s.scene = j.at("scene").get<std::vector<double>>();
    s.history = j.at("history").get<std::vector<std::vector<double>>>();
    s.trajectory = j.at("trajectory_edge_ids").get<std::vector<int>>();
    s.cr = j.at("cr").get<std::vector<double>>();
    s.gt_index = j.at("gt_index").get<int>();
    s.is_noisy = j.at("is_noisy").get<bool>();
    if (n != s.candidates.size()) bad_line(line_number, "n_candidates does not match candidate list");
  } catch (const nlohmann::json::exception& e) {
    bad_line(line_number, std::string("schema violation: ") + e.what());
  }
  if (s.candidates.empty()) bad_line(line_number, "sample has no candidates");
  if (s.cr.size() != s.candidates.size()) bad_line(line_number, "cr length does not match candidates");
  if (s.gt_index < 0 || static_cast<std::size_t>(s.gt_index) >= s.candidates.size()) {
    bad_line(line_number, "gt_index out of range");
  }
  return s;
}

void write_dataset(const std::vector<Sample>& samples, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open dataset for writing: " + path.string());
  for (const auto& s : samples) out << sample_to_json_line(s) << '\n';
  if (!out) throw IoError("failed writing dataset: " + path.string());
}

std::vector<Sample> read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open dataset: " + path.string());
  std::vector<Sample> samples;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    samples.push_back(sample_from_json_line(line, number));
  }
  return samples;
}

}  // namespace scasrec::world
