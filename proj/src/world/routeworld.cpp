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

#include "scasrec/world/routeworld.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <queue>
#include <set>
#include <string>

#include "scasrec/errors.hpp"
#include "scasrec/rng.hpp"

namespace scasrec::world {

namespace {

constexpr double kLightDelay = 25.0;  // seconds per traffic light
constexpr double kTurnDelay = 6.0;    // seconds per turn
constexpr double kJitterSigma = 0.3;

double quantize(double v) { return std::round(v * 1000.0) / 1000.0; }

std::vector<int> sorted_set(std::span<const int> ids) {
  std::vector<int> s(ids.begin(), ids.end());
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
  return s;
}

// Edge path of the lowest-weight route; ties resolved by node id order.
std::vector<int> dijkstra(const RoadGraph& graph, std::span<const double> weight, int origin, int destination) {
  const auto n = static_cast<std::size_t>(graph.node_count());
  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  std::vector<int> via_edge(n, -1);
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> frontier;
  dist[static_cast<std::size_t>(origin)] = 0.0;
  frontier.emplace(0.0, origin);
  while (!frontier.empty()) {
    const auto [d, node] = frontier.top();
    frontier.pop();
    if (d > dist[static_cast<std::size_t>(node)]) continue;
    if (node == destination) break;
    for (const auto& [next, eid] : graph.neighbors(node)) {
      const double nd = d + weight[static_cast<std::size_t>(eid)];
      if (nd < dist[static_cast<std::size_t>(next)]) {
        dist[static_cast<std::size_t>(next)] = nd;
        via_edge[static_cast<std::size_t>(next)] = eid;
        frontier.emplace(nd, next);
      }
    }
  }
  std::vector<int> path;
  int node = destination;
  while (node != origin) {
    const int eid = via_edge[static_cast<std::size_t>(node)];
    if (eid < 0) return {};
    path.push_back(eid);
    const Edge& e = graph.edge(eid);
    node = e.from == node ? e.to : e.from;
  }
  std::reverse(path.begin(), path.end());
  return path;
}

// Depth-first walk that prefers neighbors closer to the destination, with
// random perturbation. Gives up (empty result) after a bounded number of
// expansions, since backtracking out of a dead-end pocket can be exponential.
std::vector<int> random_simple_walk(const RoadGraph& graph, int origin, int destination, Rng& rng) {
  std::vector<char> visited(static_cast<std::size_t>(graph.node_count()), 0);
  struct Frame {
    int node;
    std::vector<std::pair<int, int>> options;  // (next node, edge)
    std::size_t next = 0;
  };
  auto make_frame = [&](int node) {
    Frame f{node, {}, 0};
    std::vector<std::pair<double, std::pair<int, int>>> scored;
    for (const auto& nb : graph.neighbors(node)) {
      if (visited[static_cast<std::size_t>(nb.first)]) continue;
      scored.push_back({graph.manhattan(nb.first, destination) + rng.uniform(0.0, 2.5), nb});
    }
    std::sort(scored.begin(), scored.end());
    for (const auto& s : scored) f.options.push_back(s.second);
    return f;
  };
  std::vector<Frame> stack;
  std::vector<int> edges;
  visited[static_cast<std::size_t>(origin)] = 1;
  stack.push_back(make_frame(origin));
  int budget = 4 * graph.node_count();
  while (!stack.empty()) {
    if (--budget < 0) return {};
    Frame& top = stack.back();
    if (top.node == destination) return edges;
    if (top.next >= top.options.size()) {
      visited[static_cast<std::size_t>(top.node)] = top.node == origin ? 1 : 0;
      stack.pop_back();
      if (!edges.empty()) edges.pop_back();
      continue;
    }
    const auto [next, eid] = top.options[top.next++];
    if (visited[static_cast<std::size_t>(next)]) continue;
    visited[static_cast<std::size_t>(next)] = 1;
    edges.push_back(eid);
    stack.push_back(make_frame(next));
  }
  return {};
}

}  // namespace

RoadGraph::RoadGraph(int width, int height, std::vector<Edge> edges)
    : width_(width), height_(height), edges_(std::move(edges)) {
  adjacency_.resize(static_cast<std::size_t>(width_ * height_));
  for (const auto& e : edges_) {
    adjacency_[static_cast<std::size_t>(e.from)].emplace_back(e.to, e.id);
    adjacency_[static_cast<std::size_t>(e.to)].emplace_back(e.from, e.id);
  }
}

int RoadGraph::manhattan(int a, int b) const noexcept {
  const auto [ax, ay] = coords(a);
  const auto [bx, by] = coords(b);
  return std::abs(ax - bx) + std::abs(ay - by);
}

RoadGraph build_grid_graph(int width, int height, std::uint64_t seed) {
  if (width < 2 || height < 2) {
    throw ConfigError("grid dimensions must be at least 2x2, got " + std::to_string(width) + "x" +
                      std::to_string(height));
  }
  Rng rng = Rng::stream(seed, 0x67726964);
  std::vector<Edge> edges;
  auto add = [&](int from, int to, bool arterial) {
    Edge e;
    e.id = static_cast<int>(edges.size());
    e.from = from;
    e.to = to;
    e.arterial = arterial;
    e.length = rng.uniform(200.0, 500.0);
    const double speed = arterial ? rng.uniform(12.0, 17.0) : rng.uniform(6.0, 10.0);
    e.travel_time = e.length / speed;
    e.toll = arterial && rng.bernoulli(0.35);
    e.light = rng.bernoulli(arterial ? 0.25 : 0.4);
    edges.push_back(e);
  };
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const int node = y * width + x;
      if (x + 1 < width) add(node, node + 1, y % 4 == 0);
      if (y + 1 < height) add(node, node + width, x % 4 == 0);
    }
  }
  return RoadGraph(width, height, std::move(edges));
}

std::vector<int> path_nodes(const RoadGraph& graph, std::span<const int> edge_ids, int origin) {
  std::vector<int> nodes{origin};
  int node = origin;
  for (int eid : edge_ids) {
    if (eid < 0 || static_cast<std::size_t>(eid) >= graph.edges().size()) return {};
    const Edge& e = graph.edge(eid);
    if (e.from == node) {
      node = e.to;
    } else if (e.to == node) {
      node = e.from;
    } else {
      return {};
    }
    nodes.push_back(node);
  }
  return nodes;
}

bool is_simple_path(const RoadGraph& graph, std::span<const int> edge_ids, int origin, int destination) {
  if (edge_ids.empty()) return false;
  const auto nodes = path_nodes(graph, edge_ids, origin);
  if (nodes.empty() || nodes.back() != destination) return false;
  std::set<int> seen(nodes.begin(), nodes.end());
  return seen.size() == nodes.size();
}

std::vector<double> route_features(const RoadGraph& graph, std::span<const int> edge_ids, int origin,
                                   std::size_t width) {
  std::vector<double> f(width, 0.0);
  if (edge_ids.empty()) return f;
  const auto nodes = path_nodes(graph, edge_ids, origin);

  double tt = 0.0, length = 0.0, toll_cost = 0.0, toll_len = 0.0, arterial_len = 0.0;
  double max_tt = 0.0, max_len = 0.0, min_speed = std::numeric_limits<double>::infinity();
  int lights = 0, tolls = 0;
  for (int eid : edge_ids) {
    const Edge& e = graph.edge(eid);
    tt += e.travel_time;
    length += e.length;
    max_tt = std::max(max_tt, e.travel_time);
    max_len = std::max(max_len, e.length);
    min_speed = std::min(min_speed, e.length / e.travel_time);
    if (e.light) ++lights;
    if (e.toll) {
      ++tolls;
      toll_cost += 1.2 * e.length / 1000.0;
      toll_len += e.length;
    }
    if (e.arterial) arterial_len += e.length;
  }
  // Turns: direction changes along the node sequence.
  int turns = 0, run = 1, longest_run = 1;
  for (std::size_t i = 2; i < nodes.size(); ++i) {
    const auto [x0, y0] = graph.coords(nodes[i - 2]);
    const auto [x1, y1] = graph.coords(nodes[i - 1]);
    const auto [x2, y2] = graph.coords(nodes[i]);
    const bool straight = (x2 - x1 == x1 - x0) && (y2 - y1 == y1 - y0);
    if (straight) {
      longest_run = std::max(longest_run, ++run);
    } else {
      ++turns;
      run = 1;
    }
  }
  const double n_edges = static_cast<double>(edge_ids.size());
  const double mean_tt = tt / n_edges;
  double var_tt = 0.0;
  for (int eid : edge_ids) var_tt += std::pow(graph.edge(eid).travel_time - mean_tt, 2);
  var_tt /= n_edges;
  const double eta = tt + kLightDelay * lights + kTurnDelay * turns;
  const double km = length / 1000.0;
  const double straight_steps = nodes.empty() ? n_edges : graph.manhattan(nodes.front(), nodes.back());

  const double values[] = {
      eta,                       // 0 estimated time of arrival (s)
      length,                    // 1 total length (m)
      toll_cost,                 // 2 toll cost
      double(lights),            // 3 traffic lights
      n_edges,                   // 4 edge count
      double(turns),             // 5 turns
      mean_tt,                   // 6
      max_tt,                    // 7
      std::sqrt(var_tt),         // 8
      length / eta,              // 9 mean speed (m/s)
      double(tolls),             // 10
      toll_len / length,         // 11
      arterial_len / length,     // 12
      std::log1p(eta),           // 13
      std::log1p(length),        // 14
      eta / km,                  // 15 seconds per km
      lights / km,               // 16
      turns / km,                // 17
      double(longest_run),       // 18
      max_len,                   // 19
      min_speed,                 // 20
      std::sqrt(eta),            // 21
      eta / 60.0,                // 22 minutes
      km,                        // 23
      tolls > 0 ? 1.0 : 0.0,     // 24
      n_edges / std::max(1.0, straight_steps),  // 25 detour ratio
  };
  const std::size_t count = std::min(width, std::size(values));
  for (std::size_t i = 0; i < count; ++i) f[i] = quantize(values[i]);
  return f;
}

CandidateSet generate_candidates(const RoadGraph& graph, int origin, int destination, int n, std::uint64_t seed,
                                 std::size_t feature_width) {
  if (origin == destination) throw ContractError("generate_candidates: origin equals destination");
  if (n < 1) throw ContractError("generate_candidates: n must be >= 1");
  if (origin < 0 || destination < 0 || origin >= graph.node_count() || destination >= graph.node_count()) {
    throw ContractError("generate_candidates: node out of range");
  }
  Rng rng(seed);
  CandidateSet out;
  std::set<std::vector<int>> seen;
  auto offer = [&](std::vector<int> path) {
    if (path.empty() || static_cast<int>(out.routes.size()) >= n) return;
    auto key = sorted_set(path);
    if (!seen.insert(std::move(key)).second) return;
    Route r;
    r.features = route_features(graph, path, origin, feature_width);
    r.edge_ids = std::move(path);
    out.routes.push_back(std::move(r));
  };

  std::vector<double> weight(graph.edges().size());
  const int draws = 4 * n;
  for (int d = 0; d < draws && static_cast<int>(out.routes.size()) < n; ++d) {
    for (const auto& e : graph.edges()) {
      const double base = e.travel_time + (e.light ? kLightDelay : 0.0);
      weight[static_cast<std::size_t>(e.id)] = d == 0 ? base : base * std::exp(kJitterSigma * rng.normal());
    }
    offer(dijkstra(graph, weight, origin, destination));
  }
  const int walks = 50 * n;
  for (int w = 0; w < walks && static_cast<int>(out.routes.size()) < n; ++w) {
    offer(random_simple_walk(graph, origin, destination, rng));
  }
  out.short_of_target = static_cast<int>(out.routes.size()) < n;
  return out;
}

std::size_t simulate_choice(std::span<const Route> candidates, std::span<const double> user_weights,
                            std::uint64_t noise_seed, double noise_scale) {
  if (candidates.empty()) throw ContractError("simulate_choice: no candidates");
  Rng rng(noise_seed);
  std::size_t best = 0;
  double best_u = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto& f = candidates[i].features;
    double u = 0.0;
    const std::size_t k = std::min(f.size(), user_weights.size());
    for (std::size_t j = 0; j < k; ++j) u += user_weights[j] * f[j];
    const double g = rng.gumbel();
    if (noise_scale != 0.0) u += noise_scale * g;
    if (u > best_u) {
      best_u = u;
      best = i;
    }
  }
  return best;
}

std::vector<int> derive_trajectory(const RoadGraph& graph, const Route& chosen, double deviation_rate,
                                   std::uint64_t seed) {
  if (!(deviation_rate >= 0.0 && deviation_rate < 1.0)) {
    throw ContractError("derive_trajectory: deviation_rate must be in [0, 1)");
  }
  if (chosen.edge_ids.empty()) throw ContractError("derive_trajectory: empty route");
  const std::size_t n = chosen.edge_ids.size();
  const auto replace = static_cast<std::size_t>(std::floor(deviation_rate * static_cast<double>(n)));
  std::set<int> route_set(chosen.edge_ids.begin(), chosen.edge_ids.end());
  if (replace == 0) return {route_set.begin(), route_set.end()};

  Rng rng(seed);
  std::vector<int> order(chosen.edge_ids.begin(), chosen.edge_ids.end());
  rng.shuffle(std::span<int>(order));
  std::set<int> u(route_set);
  for (std::size_t k = 0; k < replace; ++k) u.erase(order[k]);
  for (std::size_t k = 0; k < replace; ++k) {
    const Edge& e = graph.edge(order[k]);
    std::vector<int> detours;
    for (int endpoint : {e.from, e.to}) {
      for (const auto& [next, eid] : graph.neighbors(endpoint)) {
        (void)next;
        if (!route_set.contains(eid) && !u.contains(eid)) detours.push_back(eid);
      }
    }
    if (!detours.empty()) u.insert(detours[rng.index(detours.size())]);
  }
  return {u.begin(), u.end()};
}

double coverage_rate(std::span<const int> p, std::span<const int> u) {
  if (p.empty() && u.empty()) throw ContractError("coverage_rate: both edge sets are empty");
  const auto a = sorted_set(p);
  const auto b = sorted_set(u);
  std::size_t inter = 0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] == b[j]) {
      ++inter;
      ++i;
      ++j;
    } else if (a[i] < b[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  const std::size_t uni = a.size() + b.size() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace scasrec::world
