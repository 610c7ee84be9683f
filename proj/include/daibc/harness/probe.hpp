#pragma once

#include <map>
#include <set>
#include <vector>

#include "daibc/harness/agents.hpp"
#include "daibc/sim/expert.hpp"
#include "daibc/sim/world.hpp"

namespace daibc::harness {

// A frozen decision point: world state at the entry of a both-turns
// intersection approach, from which probe rollouts restart.
struct DecisionSnapshot {
  sim::VehicleState vehicle;
  int64_t step = 0;
  int approach_edge = -1;

  ordered_json to_json() const {
    ordered_json j;
    j["format"] = "daibc-state-v1";
    j["x"] = vehicle.pos.x;
    j["y"] = vehicle.pos.y;
    j["heading"] = vehicle.heading;
    j["speed"] = vehicle.speed;
    j["prev_steering"] = vehicle.prev_action.steering;
    j["prev_accel"] = vehicle.prev_action.accel;
    j["step"] = step;
    j["approach_edge"] = approach_edge;
    return j;
  }

  static DecisionSnapshot from_json(const ordered_json& j) {
    require(j.value("format", "") == "daibc-state-v1", "state file: unknown format");
    DecisionSnapshot s;
    s.vehicle.pos = {j.at("x").get<double>(), j.at("y").get<double>()};
    s.vehicle.heading = j.at("heading").get<double>();
    s.vehicle.speed = j.at("speed").get<double>();
    s.vehicle.prev_action = {j.at("prev_steering").get<float>(), j.at("prev_accel").get<float>()};
    s.step = j.at("step").get<int64_t>();
    s.approach_edge = j.at("approach_edge").get<int>();
    return s;
  }
};

inline void save_snapshot(const std::filesystem::path& p, const DecisionSnapshot& s) {
  write_text_file(p, s.to_json().dump(2) + "\n");
}

inline DecisionSnapshot load_snapshot(const std::filesystem::path& p) {
  try {
    return DecisionSnapshot::from_json(ordered_json::parse(read_text_file(p)));
  } catch (const ordered_json::parse_error& e) {
    throw InputError("state file: invalid JSON in " + p.string() + ": " + e.what());
  }
}

// Conditions that make a world state "the" canonical decision state: moving
// along a both-turns approach, aligned with the lane, just before the
// steering decision, with the light freshly green so rollouts clear the
// intersection inside the green window.
inline bool is_decision_state(const sim::TownMap& town, const sim::VehicleState& v, int64_t step,
                              int* approach_edge_out = nullptr) {
  const int e = town.nearest_edge(v.pos);
  if (e < 0) return false;
  const int to = town.edges[static_cast<size_t>(e)].to;
  if (town.degree(to) != 3) return false;
  auto conts = town.continuations(e);
  if (conts.size() != 2) return false;
  const Vec2 de = town.edge_dir(e);
  for (int c : conts)
    if (de.dot(town.edge_dir(c)) > 0.7) return false;
  const Vec2 h{std::cos(v.heading), std::sin(v.heading)};
  if (h.dot(de) < 0.98) return false;
  if (point_segment_distance(v.pos, town.lane_start(e), town.lane_end(e)) > 0.8) return false;
  const double dist = (town.nodes[static_cast<size_t>(to)] - v.pos).norm();
  if (dist < town.node_radius + 1.0 || dist > town.node_radius + 2.6) return false;
  if (v.speed < 2.8) return false;
  const int light = town.edge_light[static_cast<size_t>(e)];
  if (light >= 0) {
    const int cycle = town.cycle_steps();
    int64_t pos = (step + town.lights[static_cast<size_t>(light)].phase) % cycle;
    if (pos < 0) pos += cycle;
    if (pos > town.green_steps - 55) return false;  // green must hold for the rollout
  }
  if (approach_edge_out != nullptr) *approach_edge_out = e;
  return true;
}

// Drive the expert until the canonical decision state appears.
inline DecisionSnapshot find_decision_snapshot(const sim::TownMap& town, const sim::BevSpec& bev,
                                               const sim::VehicleParams& vp,
                                               const sim::ExpertParams& ep, uint64_t seed,
                                               int max_steps = 60000) {
  sim::World world(town, bev, vp);
  Rng spawn(Rng::mix(seed, 0x57A7));
  world.reset(sim::spawn_on_lane(town, spawn), 0);
  sim::ExpertDriver expert(&town, &vp, ep, seed);
  expert.reset(town.nearest_edge(world.vehicle().pos), 0.0);
  for (int t = 0; t < max_steps; ++t) {
    DecisionSnapshot snap;
    snap.vehicle = world.vehicle();
    snap.step = world.step_index();
    if (is_decision_state(town, snap.vehicle, snap.step, &snap.approach_edge)) return snap;
    const Action a = expert.act(world.vehicle(), world.step_index(),
                                [&world](int l, int64_t s) { return world.red_at(l, s); });
    world.step(a);
  }
  throw InputError("find_decision_snapshot: no canonical decision state reached");
}

// A stopped-at-red state for the unimodal landscape fixture.
inline DecisionSnapshot find_stop_at_red_snapshot(const sim::TownMap& town,
                                                  const sim::BevSpec& bev,
                                                  const sim::VehicleParams& vp,
                                                  const sim::ExpertParams& ep, uint64_t seed,
                                                  int max_steps = 20000) {
  sim::World world(town, bev, vp);
  Rng spawn(Rng::mix(seed, 0x57A8));
  world.reset(sim::spawn_on_lane(town, spawn), 0);
  sim::ExpertDriver expert(&town, &vp, ep, seed + 1);
  expert.reset(town.nearest_edge(world.vehicle().pos), 0.0);
  for (int t = 0; t < max_steps; ++t) {
    const auto& v = world.vehicle();
    const int e = town.nearest_edge(v.pos);
    if (e >= 0 && v.speed < 0.05) {
      const int light = town.edge_light[static_cast<size_t>(e)];
      const double dist_to_line =
          (town.lane_end(e) - v.pos).norm();
      if (light >= 0 && world.red_at(light, world.step_index()) && dist_to_line < 4.0) {
        DecisionSnapshot snap;
        snap.vehicle = v;
        snap.step = world.step_index();
        snap.approach_edge = e;
        return snap;
      }
    }
    const Action a = expert.act(v, world.step_index(),
                                [&world](int l, int64_t s) { return world.red_at(l, s); });
    world.step(a);
  }
  throw InputError("find_stop_at_red_snapshot: expert never waited at a red light");
}

struct ProbeConfig {
  int m = 100;             // inferences per decision state
  int rollout_steps = 80;  // branch classification horizon
  int free_run_steps = 2000;
  uint64_t seed = 1;
  float steer_threshold = 0.015f;
};

struct ProbeReport {
  std::string agent;
  int m = 0;
  std::vector<int> branch_edges;       // candidate continuations
  std::vector<int> branch_counts;      // rollouts that entered each branch
  int unresolved = 0;                  // rollouts that never cleared the intersection
  std::vector<double> branch_fractions;
  int steer_left = 0, steer_right = 0, steer_zero = 0;
  int free_run_distinct_edges = 0;

  ordered_json to_json() const {
    ordered_json j;
    j["format"] = "daibc-probe-v1";
    j["agent"] = agent;
    j["m"] = m;
    j["branch_edges"] = branch_edges;
    j["branch_counts"] = branch_counts;
    j["branch_fractions"] = branch_fractions;
    j["unresolved"] = unresolved;
    j["steer_left"] = steer_left;
    j["steer_right"] = steer_right;
    j["steer_zero"] = steer_zero;
    j["free_run_distinct_edges"] = free_run_distinct_edges;
    return j;
  }
};

// M restarts from the decision state: classify each rollout by the road edge
// actually entered and by the sign of the first inferred steering command,
// then measure road coverage over one long free run.
inline ProbeReport multimodality_probe(Agent& agent, const sim::TownMap& town,
                                       const DecisionSnapshot& snap, const ProbeConfig& cfg,
                                       const sim::BevSpec& bev,
                                       const sim::VehicleParams& vp = {}) {
  require(snap.approach_edge >= 0, "probe: snapshot lacks an approach edge");
  ProbeReport report;
  report.agent = agent.describe();
  report.m = cfg.m;
  report.branch_edges = town.continuations(snap.approach_edge);
  report.branch_counts.assign(report.branch_edges.size(), 0);

  sim::World world(town, bev, vp);
  for (int trial = 0; trial < cfg.m; ++trial) {
    Rng rng = Rng(cfg.seed).derive(Rng::mix(0x9B0, static_cast<uint64_t>(trial)));
    world.reset(snap.vehicle, snap.step);
    bool first = true;
    int entered = -1;
    for (int t = 0; t < cfg.rollout_steps && entered < 0; ++t) {
      const sim::Observation obs = world.render();
      const Action a = agent.act(obs, rng);
      if (first) {
        if (a.steering > cfg.steer_threshold) ++report.steer_left;
        else if (a.steering < -cfg.steer_threshold) ++report.steer_right;
        else ++report.steer_zero;
        first = false;
      }
      world.step(a);
      const Vec2 p = world.vehicle().pos;
      for (size_t b = 0; b < report.branch_edges.size(); ++b) {
        const int e = report.branch_edges[b];
        if (point_segment_distance(p, town.lane_start(e), town.lane_end(e)) < 2.0 &&
            (p - town.lane_start(e)).dot(town.edge_dir(e)) > 0.0) {
          entered = static_cast<int>(b);
          break;
        }
      }
    }
    if (entered >= 0) ++report.branch_counts[static_cast<size_t>(entered)];
    else ++report.unresolved;
  }
  for (int c : report.branch_counts)
    report.branch_fractions.push_back(static_cast<double>(c) / static_cast<double>(cfg.m));

  // free run coverage
  Rng rng = Rng(cfg.seed).derive(0xF3EE);
  world.reset(snap.vehicle, snap.step);
  std::set<int> visited;
  for (int t = 0; t < cfg.free_run_steps; ++t) {
    const sim::Observation obs = world.render();
    world.step(agent.act(obs, rng));
    const int e = town.nearest_edge(world.vehicle().pos);
    if (e >= 0) visited.insert(e);
  }
  report.free_run_distinct_edges = static_cast<int>(visited.size());
  return report;
}

}  // namespace daibc::harness
