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

#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace scasrec::world {

struct Edge {
  int id = 0;
  int from = 0;
  int to = 0;
  double travel_time = 0.0;  // seconds
  double length = 0.0;       // meters
  bool toll = false;
  bool light = false;
  bool arterial = false;
};

/// Undirected grid road network. Node (x, y) has id y * width + x.
class RoadGraph {
 public:
  RoadGraph(int width, int height, std::vector<Edge> edges);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int node_count() const noexcept { return width_ * height_; }
  int node_id(int x, int y) const noexcept { return y * width_ + x; }
  std::pair<int, int> coords(int node) const noexcept { return {node % width_, node / width_}; }
  int manhattan(int a, int b) const noexcept;

  const std::vector<Edge>& edges() const noexcept { return edges_; }
  const Edge& edge(int id) const { return edges_.at(static_cast<std::size_t>(id)); }
  // (neighbor node, edge id) pairs, ordered by edge id.
  const std::vector<std::pair<int, int>>& neighbors(int node) const {
    return adjacency_.at(static_cast<std::size_t>(node));
  }

 private:
  int width_;
  int height_;
  std::vector<Edge> edges_;
  std::vector<std::vector<std::pair<int, int>>> adjacency_;
};

RoadGraph build_grid_graph(int width, int height, std::uint64_t seed);

struct Route {
  std::vector<int> edge_ids;  // ordered path from origin to destination
  std::vector<double> features;

  friend bool operator==(const Route&, const Route&) = default;
};

/// Fills a route's feature vector from edge attributes. Slots beyond the
/// computed statistics are zero.
std::vector<double> route_features(const RoadGraph& graph, std::span<const int> edge_ids, int origin,
                                   std::size_t width);

struct CandidateSet {
  std::vector<Route> routes;
  bool short_of_target = false;  // fewer distinct simple paths found than requested
};

// Shortest paths under independently jittered edge weights (draw 0 is
// unjittered), de-duplicated by edge set, topped up by randomized simple walks.
CandidateSet generate_candidates(const RoadGraph& graph, int origin, int destination, int n, std::uint64_t seed,
                                 std::size_t feature_width = 62);

// Node sequence of an edge path starting at `origin`; empty if the edges do
// not form a walk from origin.
std::vector<int> path_nodes(const RoadGraph& graph, std::span<const int> edge_ids, int origin);
bool is_simple_path(const RoadGraph& graph, std::span<const int> edge_ids, int origin, int destination);

/// Index maximizing w . features + noise_scale * Gumbel. Ties go to the lowest index.
std::size_t simulate_choice(std::span<const Route> candidates, std::span<const double> user_weights,
                            std::uint64_t noise_seed, double noise_scale = 1.0);

/// Sorted edge-id set: the chosen route with floor(rate * |edges|) edges
/// swapped for adjacent detour edges.
std::vector<int> derive_trajectory(const RoadGraph& graph, const Route& chosen, double deviation_rate,
                                   std::uint64_t seed);

/// Jaccard similarity of two edge-id sets (inputs need not be sorted).
double coverage_rate(std::span<const int> p, std::span<const int> u);

}  // namespace scasrec::world
