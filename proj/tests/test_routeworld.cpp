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
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <queue>
#include <set>
#include <sstream>

#include "doctest.h"
#include "scasrec/errors.hpp"
#include "scasrec/rng.hpp"
#include "scasrec/world/dataset.hpp"
#include "scasrec/world/routeworld.hpp"

using namespace scasrec;
using namespace scasrec::world;

namespace {

bool bfs_reaches_all(const RoadGraph& g) {
  std::vector<char> seen(static_cast<std::size_t>(g.node_count()), 0);
  std::queue<int> q;
  q.push(0);
  seen[0] = 1;
  int count = 1;
  while (!q.empty()) {
    const int v = q.front();
    q.pop();
    for (const auto& [nb, eid] : g.neighbors(v)) {
      (void)eid;
      if (!seen[static_cast<std::size_t>(nb)]) {
        seen[static_cast<std::size_t>(nb)] = 1;
        ++count;
        q.push(nb);
      }
    }
  }
  return count == g.node_count();
}

// Every simple path between two nodes, as edge-id sets.
std::set<std::set<int>> enumerate_simple_paths(const RoadGraph& g, int from, int to) {
  std::set<std::set<int>> out;
  std::vector<char> on_path(static_cast<std::size_t>(g.node_count()), 0);
  std::vector<int> edges;
  std::function<void(int)> dfs = [&](int v) {
    if (v == to) {
      out.insert(std::set<int>(edges.begin(), edges.end()));
      return;
    }
    on_path[static_cast<std::size_t>(v)] = 1;
    for (const auto& [nb, eid] : g.neighbors(v)) {
      if (on_path[static_cast<std::size_t>(nb)]) continue;
      edges.push_back(eid);
      dfs(nb);
      edges.pop_back();
    }
    on_path[static_cast<std::size_t>(v)] = 0;
  };
  dfs(from);
  return out;
}

// Bellman-Ford over the unjittered edge cost.
double shortest_cost(const RoadGraph& g, int from, int to) {
  std::vector<double> d(static_cast<std::size_t>(g.node_count()), std::numeric_limits<double>::infinity());
  d[static_cast<std::size_t>(from)] = 0;
  for (int it = 0; it < g.node_count(); ++it) {
    for (const auto& e : g.edges()) {
      const double w = e.travel_time + (e.light ? 25.0 : 0.0);
      auto& a = d[static_cast<std::size_t>(e.from)];
      auto& b = d[static_cast<std::size_t>(e.to)];
      if (a + w < b) b = a + w;
      if (b + w < a) a = b + w;
    }
  }
  return d[static_cast<std::size_t>(to)];
}

double path_cost(const RoadGraph& g, const std::vector<int>& path) {
  double c = 0;
  for (int eid : path) c += g.edge(eid).travel_time + (g.edge(eid).light ? 25.0 : 0.0);
  return c;
}

double jaccard_oracle(const std::vector<int>& p, const std::vector<int>& u) {
  std::set<int> a(p.begin(), p.end()), b(u.begin(), u.end()), uni(a);
  uni.insert(b.begin(), b.end());
  int inter = 0;
  for (int x : a) inter += b.count(x) ? 1 : 0;
  return static_cast<double>(inter) / static_cast<double>(uni.size());
}

Route make_route(std::vector<int> edges, std::vector<double> features) { return Route{std::move(edges), std::move(features)}; }

WorldConfig small_world(std::uint64_t seed) {
  WorldConfig c;
  c.grid_width = 6;
  c.grid_height = 6;
  c.max_candidates = 5;
  c.history_length = 3;
  c.users = 10;
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("smallest grid has four nodes and four edges") {
  const RoadGraph g = build_grid_graph(2, 2, 1);
  CHECK(g.node_count() == 4);
  CHECK(g.edges().size() == 4);
  CHECK(bfs_reaches_all(g));
}

TEST_CASE("grid graphs are connected and seed-deterministic") {
  for (int w = 2; w <= 7; ++w) {
    for (int h = 2; h <= 5; ++h) CHECK(bfs_reaches_all(build_grid_graph(w, h, 17)));
  }
  const RoadGraph a = build_grid_graph(5, 5, 99);
  const RoadGraph b = build_grid_graph(5, 5, 99);
  REQUIRE(a.edges().size() == b.edges().size());
  for (std::size_t i = 0; i < a.edges().size(); ++i) {
    CHECK(a.edges()[i].travel_time == b.edges()[i].travel_time);
    CHECK(a.edges()[i].length == b.edges()[i].length);
    CHECK(a.edges()[i].toll == b.edges()[i].toll);
    CHECK(a.edges()[i].light == b.edges()[i].light);
  }
  CHECK_THROWS_AS(build_grid_graph(1, 5, 1), ConfigError);
}

TEST_CASE("single candidate is the unjittered shortest path") {
  const RoadGraph g = build_grid_graph(8, 8, 3);
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const int o = static_cast<int>(rng.index(64));
    int d = static_cast<int>(rng.index(64));
    if (d == o) d = (o + 9) % 64;
    const auto set = generate_candidates(g, o, d, 1, rng.next());
    REQUIRE(set.routes.size() == 1);
    CHECK(path_cost(g, set.routes[0].edge_ids) == doctest::Approx(shortest_cost(g, o, d)).epsilon(1e-12));
  }
}

TEST_CASE("candidates are distinct simple origin-destination paths") {
  const RoadGraph g = build_grid_graph(12, 12, 4);
  Rng rng(6);
  for (int trial = 0; trial < 30; ++trial) {
    const int o = static_cast<int>(rng.index(144));
    int d = static_cast<int>(rng.index(144));
    if (d == o) d = (o + 13) % 144;
    const auto set = generate_candidates(g, o, d, 10, rng.next());
    CHECK(set.routes.size() == 10);
    CHECK_FALSE(set.short_of_target);
    std::set<std::set<int>> distinct;
    for (const auto& r : set.routes) {
      CHECK(is_simple_path(g, r.edge_ids, o, d));
      CHECK(r.features.size() == 62);
      distinct.insert(std::set<int>(r.edge_ids.begin(), r.edge_ids.end()));
    }
    CHECK(distinct.size() == set.routes.size());
  }
}

TEST_CASE("2x2 grid opposite corners yields exactly the two simple paths") {
  const RoadGraph g = build_grid_graph(2, 2, 8);
  const auto all = enumerate_simple_paths(g, 0, 3);
  REQUIRE(all.size() == 2);
  const auto set = generate_candidates(g, 0, 3, 2, 21);
  REQUIRE(set.routes.size() == 2);
  std::set<std::set<int>> got;
  for (const auto& r : set.routes) {
    CHECK(r.edge_ids.size() == 2);
    got.insert(std::set<int>(r.edge_ids.begin(), r.edge_ids.end()));
  }
  CHECK(got == all);

  const auto more = generate_candidates(g, 0, 3, 5, 21);
  CHECK(more.routes.size() == 2);
  CHECK(more.short_of_target);
  CHECK_THROWS_AS(generate_candidates(g, 1, 1, 2, 0), ContractError);
}

TEST_CASE("simulate_choice") {
  std::vector<Route> one = {make_route({0}, {5.0, 1.0})};
  CHECK(simulate_choice(one, std::vector<double>{1.0, 1.0}, 3) == 0);

  std::vector<Route> routes = {make_route({0}, {600, 2}), make_route({1}, {420, 9}), make_route({2}, {900, 0})};
  const std::vector<double> eta_only = {-1.0, 0.0};
  CHECK(simulate_choice(routes, eta_only, 11, 0.0) == 1);

  const std::vector<double> w = {-0.01, -0.1};
  for (std::uint64_t seed = 0; seed < 20; ++seed) CHECK(simulate_choice(routes, w, seed) == simulate_choice(routes, w, seed));
  CHECK_THROWS_AS(simulate_choice(std::vector<Route>{}, w, 1), ContractError);
}

TEST_CASE("derive_trajectory") {
  const RoadGraph g = build_grid_graph(6, 6, 2);
  const auto set = generate_candidates(g, 0, 35, 3, 9);
  const Route& r = set.routes[0];
  const auto u0 = derive_trajectory(g, r, 0.0, 1);
  CHECK(coverage_rate(r.edge_ids, u0) == 1.0);

  // A 4-edge route: (0,0) -> (2,2) on a grid.
  const auto short_set = generate_candidates(g, 0, g.node_id(2, 2), 1, 4);
  const Route& four = short_set.routes[0];
  REQUIRE(four.edge_ids.size() == 4);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto u = derive_trajectory(g, four, 0.5, seed);
    int retained = 0;
    for (int e : four.edge_ids) retained += std::binary_search(u.begin(), u.end(), e) ? 1 : 0;
    CHECK(retained == 2);
    CHECK(coverage_rate(four.edge_ids, u) == doctest::Approx(jaccard_oracle(four.edge_ids, u)).epsilon(1e-15));
    CHECK(coverage_rate(four.edge_ids, u) < 1.0);
  }
  for (double rate : {0.0, 0.3, 0.9}) CHECK_FALSE(derive_trajectory(g, r, rate, 5).empty());
  CHECK_THROWS_AS(derive_trajectory(g, r, 1.0, 5), ContractError);
}

TEST_CASE("coverage_rate") {
  const std::vector<int> ab = {1, 2}, bc = {2, 3}, de = {4, 5};
  CHECK(coverage_rate(ab, ab) == 1.0);
  CHECK(coverage_rate(ab, bc) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(coverage_rate(ab, de) == 0.0);
  CHECK_THROWS_AS(coverage_rate(std::vector<int>{}, std::vector<int>{}), ContractError);

  Rng rng(4);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<int> p, u;
    for (std::size_t k = 1 + rng.index(8); k > 0; --k) p.push_back(static_cast<int>(rng.index(12)));
    for (std::size_t k = 1 + rng.index(8); k > 0; --k) u.push_back(static_cast<int>(rng.index(12)));
    CHECK(coverage_rate(p, u) == coverage_rate(u, p));
    CHECK(coverage_rate(p, u) == doctest::Approx(jaccard_oracle(p, u)).epsilon(1e-15));
  }
}

TEST_CASE("generated samples satisfy the labeling invariants") {
  WorldConfig cfg = small_world(3);
  cfg.deviation = 0.0;
  const auto samples = generate_dataset(cfg, 0, 200);
  for (const auto& s : samples) {
    REQUIRE(!s.candidates.empty());
    CHECK(s.candidates.size() <= 5);
    const double mx = *std::max_element(s.cr.begin(), s.cr.end());
    CHECK(s.gt_cr() == mx);
    const auto first = std::find(s.cr.begin(), s.cr.end(), mx) - s.cr.begin();
    CHECK(first == s.gt_index);
    CHECK(std::count(s.cr.begin(), s.cr.end(), 1.0) == 1);
    CHECK(s.scene.size() == 10);
    CHECK(s.history.size() == 3);
    for (const auto& h : s.history) CHECK(h.size() == 31);
    for (double c : s.cr) CHECK((c >= 0.0 && c <= 1.0));
  }
}

TEST_CASE("inject_noise") {
  WorldConfig cfg = small_world(5);
  auto clean = generate_dataset(cfg, 0, 60);
  auto same = clean;
  inject_noise(same, 0.0, 77);
  CHECK(same == clean);

  auto all = clean;
  inject_noise(all, 1.0, 77);
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (clean[i].candidates.size() < 2) continue;
    CHECK(all[i].gt_index != clean[i].gt_index);
    CHECK(all[i].is_noisy);
  }

  // Cheap synthetic samples for the concentration check.
  std::vector<Sample> many(10000);
  for (std::size_t i = 0; i < many.size(); ++i) {
    auto& s = many[i];
    s.sample_id = static_cast<std::int64_t>(i);
    s.candidates = {make_route({1, 2}, {}), make_route({3, 4}, {}), make_route({5, 6}, {})};
    s.trajectory = {1, 2};
    label_coverage(s);
  }
  for (double beta : {0.05, 0.3}) {
    auto copy = many;
    inject_noise(copy, beta, 2024);
    const auto noisy = std::count_if(copy.begin(), copy.end(), [](const Sample& s) { return s.is_noisy; });
    CHECK(std::abs(static_cast<double>(noisy) / 10000.0 - beta) <= 0.02);
  }
}

TEST_CASE("dataset files round-trip exactly and are reproducible") {
  const auto dir = std::filesystem::temp_directory_path();
  WorldConfig cfg = small_world(9);
  cfg.noise = 0.1;
  const auto samples = generate_dataset(cfg, 0, 100);
  write_dataset(samples, dir / "rt_a.jsonl");
  CHECK(read_dataset(dir / "rt_a.jsonl") == samples);

  write_dataset(generate_dataset(cfg, 0, 100), dir / "rt_b.jsonl");
  auto slurp = [](const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  CHECK(slurp(dir / "rt_a.jsonl") == slurp(dir / "rt_b.jsonl"));

  // Disjoint id ranges are consistent with a single generation.
  const auto tail = generate_dataset(cfg, 60, 40);
  for (std::size_t i = 0; i < tail.size(); ++i) CHECK(tail[i] == samples[60 + i]);

  // Values that need all 17 digits survive.
  auto tricky = samples;
  tricky[0].candidates[0].features[0] = 0.1 + 0.2;
  tricky[0].scene[1] = 1.0 / 3.0;
  write_dataset(tricky, dir / "rt_c.jsonl");
  CHECK(read_dataset(dir / "rt_c.jsonl") == tricky);
}

TEST_CASE("dataset reader errors") {
  const auto dir = std::filesystem::temp_directory_path();
  const auto samples = generate_dataset(small_world(2), 0, 3);
  std::string line2 = sample_to_json_line(samples[1]);
  {
    std::ofstream out(dir / "trunc.jsonl");
    out << sample_to_json_line(samples[0]) << '\n' << line2.substr(0, line2.size() / 2) << '\n';
  }
  try {
    read_dataset(dir / "trunc.jsonl");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  { std::ofstream out(dir / "empty.jsonl"); }
  CHECK(read_dataset(dir / "empty.jsonl").empty());

  std::string v2 = sample_to_json_line(samples[0]);
  v2.replace(v2.find("\"schema_version\":1"), 18, "\"schema_version\":2");
  {
    std::ofstream out(dir / "v2.jsonl");
    out << v2 << '\n';
  }
  CHECK_THROWS_AS(read_dataset(dir / "v2.jsonl"), VersionError);
}
