#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <vector>

#include "daibc/blobfile.hpp"
#include "daibc/common.hpp"
#include "daibc/rng.hpp"

namespace daibc::sim {

struct LaneEdge {
  int from = 0;
  int to = 0;
};

struct TrafficLight {
  int node = 0;   // controlled intersection
  int edge = 0;   // incoming directed edge this light gates
  int phase = 0;  // cycle offset, steps
};

// Road network on a planar node set. Streets are bidirectional: directed
// lane edges come in (e, e^1) pairs, right-hand traffic, lane centerlines
// offset to the right of the street axis. Intersections are disks at nodes.
struct TownMap {
  uint64_t seed = 0;
  double block_size = 40.0;
  double road_half = 4.0;
  double lane_offset = 2.0;
  double node_radius = 4.0;
  int green_steps = 80;
  int red_steps = 40;

  std::vector<Vec2> nodes;
  std::vector<LaneEdge> edges;             // directed; reverse of e is e^1
  std::vector<std::vector<int>> node_out;  // outgoing edge ids per node
  std::vector<TrafficLight> lights;
  std::vector<int> edge_light;  // light id per edge, -1 if ungated

  int cycle_steps() const { return green_steps + red_steps; }

  Vec2 edge_dir(int e) const {
    return (nodes[static_cast<size_t>(edges[static_cast<size_t>(e)].to)] -
            nodes[static_cast<size_t>(edges[static_cast<size_t>(e)].from)])
        .normalized();
  }
  double edge_len(int e) const {
    return (nodes[static_cast<size_t>(edges[static_cast<size_t>(e)].to)] -
            nodes[static_cast<size_t>(edges[static_cast<size_t>(e)].from)])
        .norm();
  }
  int reverse_edge(int e) const { return e ^ 1; }

  // Lane centerline trimmed at the intersection disks.
  Vec2 lane_start(int e) const {
    const Vec2 d = edge_dir(e);
    return nodes[static_cast<size_t>(edges[static_cast<size_t>(e)].from)] + d * node_radius +
           d.right() * lane_offset;
  }
  Vec2 lane_end(int e) const {
    const Vec2 d = edge_dir(e);
    return nodes[static_cast<size_t>(edges[static_cast<size_t>(e)].to)] - d * node_radius +
           d.right() * lane_offset;
  }
  double lane_len(int e) const { return std::max(0.1, edge_len(e) - 2.0 * node_radius); }
  Vec2 lane_point(int e, double s) const { return lane_start(e) + edge_dir(e) * s; }

  // Stop line across the incoming lane at the intersection boundary.
  Vec2 stop_line_a(int e) const {
    const Vec2 d = edge_dir(e);
    return nodes[static_cast<size_t>(edges[static_cast<size_t>(e)].to)] - d * node_radius;
  }
  Vec2 stop_line_b(int e) const { return stop_line_a(e) + edge_dir(e).right() * road_half; }

  // Legal next edges after e, excluding the U-turn unless nothing else exists.
  std::vector<int> continuations(int e) const {
    std::vector<int> out;
    const int rev = reverse_edge(e);
    for (int n : node_out[static_cast<size_t>(edges[static_cast<size_t>(e)].to)])
      if (n != rev) out.push_back(n);
    if (out.empty()) out.push_back(rev);
    return out;
  }

  int degree(int node) const { return static_cast<int>(node_out[static_cast<size_t>(node)].size()); }

  bool light_red(int light_id, int64_t step) const {
    const auto& l = lights[static_cast<size_t>(light_id)];
    const int c = cycle_steps();
    int64_t pos = (step + l.phase) % c;
    if (pos < 0) pos += c;
    return pos >= green_steps;
  }

  bool drivable(const Vec2& p) const {
    for (size_t e = 0; e < edges.size(); e += 2) {
      const Vec2& a = nodes[static_cast<size_t>(edges[e].from)];
      const Vec2& b = nodes[static_cast<size_t>(edges[e].to)];
      if (point_segment_distance(p, a, b) <= road_half) return true;
    }
    for (const Vec2& n : nodes)
      if ((p - n).norm() <= node_radius) return true;
    return false;
  }

  // Directed lane whose centerline is nearest to p, or -1 if p is farther
  // than the road half-width from every lane.
  int nearest_edge(const Vec2& p) const {
    int best = -1;
    double best_d = road_half;
    for (size_t e = 0; e < edges.size(); ++e) {
      double d = point_segment_distance(p, lane_start(static_cast<int>(e)),
                                        lane_end(static_cast<int>(e)));
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(e);
      }
    }
    return best;
  }

  void validate() const {
    require(!nodes.empty() && !edges.empty(), "town: empty graph");
    require(edges.size() % 2 == 0, "town: edges must pair with their reverses");
    for (size_t e = 0; e < edges.size(); ++e) {
      require(edges[e].from >= 0 && edges[e].from < static_cast<int>(nodes.size()) &&
                  edges[e].to >= 0 && edges[e].to < static_cast<int>(nodes.size()),
              "town: edge endpoint out of range");
      const auto& r = edges[e ^ 1];
      require(r.from == edges[e].to && r.to == edges[e].from, "town: broken reverse pairing");
    }
    for (size_t n = 0; n < nodes.size(); ++n)
      require(degree(static_cast<int>(n)) >= 2, "town: dead-end node " + std::to_string(n));
    // strong connectivity: bidirectional streets make it equal to undirected
    std::vector<char> seen(nodes.size(), 0);
    std::vector<int> stack = {0};
    seen[0] = 1;
    while (!stack.empty()) {
      int n = stack.back();
      stack.pop_back();
      for (int e : node_out[static_cast<size_t>(n)]) {
        int m = edges[static_cast<size_t>(e)].to;
        if (!seen[static_cast<size_t>(m)]) {
          seen[static_cast<size_t>(m)] = 1;
          stack.push_back(m);
        }
      }
    }
    for (char s : seen) require(s == 1, "town: graph not connected");
    require(lane_offset > 0 && lane_offset < road_half, "town: lane offset out of range");
    require(green_steps > 0 && red_steps > 0, "town: light durations must be positive");
  }
};

namespace detail {

inline void finalize_edges(TownMap& town, const std::vector<std::pair<int, int>>& streets,
                           Rng* light_rng) {
  town.node_out.assign(town.nodes.size(), {});
  town.edges.clear();
  for (auto [a, b] : streets) {
    town.node_out[static_cast<size_t>(a)].push_back(static_cast<int>(town.edges.size()));
    town.edges.push_back({a, b});
    town.node_out[static_cast<size_t>(b)].push_back(static_cast<int>(town.edges.size()));
    town.edges.push_back({b, a});
  }
  town.lights.clear();
  town.edge_light.assign(town.edges.size(), -1);
  for (size_t n = 0; n < town.nodes.size(); ++n) {
    if (town.degree(static_cast<int>(n)) < 3) continue;
    for (int out : town.node_out[n]) {
      const int in = town.reverse_edge(out);
      TrafficLight l;
      l.node = static_cast<int>(n);
      l.edge = in;
      l.phase = light_rng != nullptr ? light_rng->below(town.cycle_steps()) : 0;
      town.edge_light[static_cast<size_t>(in)] = static_cast<int>(town.lights.size());
      town.lights.push_back(l);
    }
  }
}

inline bool connected_without(const std::vector<std::pair<int, int>>& streets, size_t skip,
                              size_t n_nodes) {
  std::vector<std::vector<int>> adj(n_nodes);
  for (size_t i = 0; i < streets.size(); ++i) {
    if (i == skip) continue;
    adj[static_cast<size_t>(streets[i].first)].push_back(streets[i].second);
    adj[static_cast<size_t>(streets[i].second)].push_back(streets[i].first);
  }
  std::vector<char> seen(n_nodes, 0);
  std::vector<int> stack = {0};
  seen[0] = 1;
  size_t count = 1;
  while (!stack.empty()) {
    int n = stack.back();
    stack.pop_back();
    for (int m : adj[static_cast<size_t>(n)])
      if (!seen[static_cast<size_t>(m)]) {
        seen[static_cast<size_t>(m)] = 1;
        ++count;
        stack.push_back(m);
      }
  }
  return count == n_nodes;
}

}  // namespace detail

// Deterministic town of `blocks` x `blocks` city blocks: a full street grid
// with a seeded fraction of streets removed, keeping every node at degree
// >= 2 and the graph connected.
inline TownMap gen_town(uint64_t seed, int blocks) {
  require(blocks >= 2, "gen_town: blocks must be >= 2");
  TownMap town;
  town.seed = seed;
  const int side = blocks + 1;
  for (int gy = 0; gy < side; ++gy)
    for (int gx = 0; gx < side; ++gx)
      town.nodes.push_back({gx * town.block_size, gy * town.block_size});
  auto nid = [side](int gx, int gy) { return gy * side + gx; };

  std::vector<std::pair<int, int>> streets;
  for (int gy = 0; gy < side; ++gy)
    for (int gx = 0; gx < side; ++gx) {
      if (gx + 1 < side) streets.push_back({nid(gx, gy), nid(gx + 1, gy)});
      if (gy + 1 < side) streets.push_back({nid(gx, gy), nid(gx, gy + 1)});
    }

  Rng rng(Rng::mix(seed, 0x7031));
  std::vector<size_t> order(streets.size());
  std::iota(order.begin(), order.end(), size_t(0));
  // seeded Fisher-Yates
  for (size_t i = order.size(); i > 1; --i)
    std::swap(order[i - 1], order[static_cast<size_t>(rng.below(static_cast<int>(i)))]);

  std::vector<int> deg(town.nodes.size(), 0);
  for (auto [a, b] : streets) {
    deg[static_cast<size_t>(a)]++;
    deg[static_cast<size_t>(b)]++;
  }
  size_t want_removed = streets.size() / 4;
  std::vector<char> removed(streets.size(), 0);
  size_t n_removed = 0;
  for (size_t k = 0; k < order.size() && n_removed < want_removed; ++k) {
    const size_t i = order[k];
    auto [a, b] = streets[i];
    if (deg[static_cast<size_t>(a)] <= 2 || deg[static_cast<size_t>(b)] <= 2) continue;
    std::vector<std::pair<int, int>> kept;
    for (size_t j = 0; j < streets.size(); ++j)
      if (!removed[j] && j != i) kept.push_back(streets[j]);
    if (!detail::connected_without(kept, kept.size(), town.nodes.size())) continue;
    removed[i] = 1;
    ++n_removed;
    deg[static_cast<size_t>(a)]--;
    deg[static_cast<size_t>(b)]--;
  }
  std::vector<std::pair<int, int>> final_streets;
  for (size_t j = 0; j < streets.size(); ++j)
    if (!removed[j]) final_streets.push_back(streets[j]);

  Rng light_rng = rng.derive(0x11617);
  detail::finalize_edges(town, final_streets, &light_rng);
  town.validate();
  return town;
}

// Canonical towns: training happens in one road network, evaluation in a
// structurally different one.
inline constexpr uint64_t kTrainTownSeed = 101;
inline constexpr uint64_t kEvalTownSeed = 202;

// Canonical symmetric fixture: a 2x3 node ladder whose middle rung meets the
// two side streets at symmetric three-way intersections. Approaching either
// middle node along the rung leaves exactly two mirror-image continuations.
inline TownMap make_t_fixture_town() {
  TownMap town;
  town.seed = 0xF1;
  // wider intersection disks and a narrower lane offset keep the left and
  // right turn radii comparable, so the two steering modes at the T are
  // close to mirror images in magnitude as well as sign
  town.road_half = 3.5;
  town.lane_offset = 1.5;
  town.node_radius = 7.0;
  const double b = town.block_size;
  town.nodes = {{0, 0}, {0, b}, {0, 2 * b}, {b, 0}, {b, b}, {b, 2 * b}};
  std::vector<std::pair<int, int>> streets = {
      {0, 1}, {1, 2}, {3, 4}, {4, 5},  // side rails
      {0, 3}, {1, 4}, {2, 5},          // rungs
  };
  detail::finalize_edges(town, streets, nullptr);  // all light phases zero
  town.validate();
  return town;
}

inline ordered_json town_to_json(const TownMap& t) {
  ordered_json j;
  j["format"] = "daibc-town-v1";
  j["seed"] = t.seed;
  j["block_size"] = t.block_size;
  j["road_half"] = t.road_half;
  j["lane_offset"] = t.lane_offset;
  j["node_radius"] = t.node_radius;
  j["green_steps"] = t.green_steps;
  j["red_steps"] = t.red_steps;
  ordered_json nodes = ordered_json::array();
  for (const Vec2& n : t.nodes) nodes.push_back({n.x, n.y});
  j["nodes"] = nodes;
  ordered_json edges = ordered_json::array();
  for (const LaneEdge& e : t.edges) edges.push_back({e.from, e.to});
  j["edges"] = edges;
  ordered_json lights = ordered_json::array();
  for (const TrafficLight& l : t.lights) {
    ordered_json lj;
    lj["node"] = l.node;
    lj["edge"] = l.edge;
    lj["phase"] = l.phase;
    lights.push_back(lj);
  }
  j["lights"] = lights;
  return j;
}

inline TownMap town_from_json(const ordered_json& j) {
  require(j.value("format", "") == "daibc-town-v1", "town: unknown format");
  TownMap t;
  t.seed = j.at("seed").get<uint64_t>();
  t.block_size = j.at("block_size").get<double>();
  t.road_half = j.at("road_half").get<double>();
  t.lane_offset = j.at("lane_offset").get<double>();
  t.node_radius = j.at("node_radius").get<double>();
  t.green_steps = j.at("green_steps").get<int>();
  t.red_steps = j.at("red_steps").get<int>();
  for (const auto& n : j.at("nodes")) t.nodes.push_back({n[0].get<double>(), n[1].get<double>()});
  for (const auto& e : j.at("edges")) t.edges.push_back({e[0].get<int>(), e[1].get<int>()});
  t.node_out.assign(t.nodes.size(), {});
  for (size_t e = 0; e < t.edges.size(); ++e)
    t.node_out[static_cast<size_t>(t.edges[e].from)].push_back(static_cast<int>(e));
  t.edge_light.assign(t.edges.size(), -1);
  for (const auto& lj : j.at("lights")) {
    TrafficLight l;
    l.node = lj.at("node").get<int>();
    l.edge = lj.at("edge").get<int>();
    l.phase = lj.at("phase").get<int>();
    t.edge_light[static_cast<size_t>(l.edge)] = static_cast<int>(t.lights.size());
    t.lights.push_back(l);
  }
  t.validate();
  return t;
}

inline void save_town(const std::filesystem::path& path, const TownMap& t) {
  write_text_file(path, town_to_json(t).dump(2) + "\n");
}

inline TownMap load_town(const std::filesystem::path& path) {
  try {
    return town_from_json(ordered_json::parse(read_text_file(path)));
  } catch (const ordered_json::parse_error& e) {
    throw InputError("town: invalid JSON in " + path.string() + ": " + e.what());
  }
}

inline uint64_t town_structural_hash(const TownMap& t) { return fnv1a64(town_to_json(t).dump()); }

}  // namespace daibc::sim
