#pragma once

#include <cmath>
#include <set>
#include <vector>

#include "daibc/harness/agents.hpp"
#include "daibc/sim/world.hpp"

namespace daibc::harness {

// Traffic-light penalty: each infraction multiplies the score by exactly 0.7.
inline double traffic_light_score(double distance, int infractions) {
  double score = distance;
  for (int i = 0; i < infractions; ++i) score *= 0.7;
  return score;
}

struct EvalConfig {
  int episodes = 10;
  int steps = 3000;
  uint64_t seed = 1;
};

struct EpisodeRow {
  int episode = 0;
  double distance = 0.0;
  int infractions = 0;
  double score = 0.0;
  int distinct_edges = 0;
};

struct EvalReport {
  std::string agent;
  ordered_json agent_stats = ordered_json::object();
  uint64_t seed = 0;
  std::vector<EpisodeRow> rows;
  double mean_distance = 0, std_distance = 0;
  double mean_score = 0, std_score = 0;

  ordered_json to_json() const {
    ordered_json j;
    j["format"] = "daibc-eval-v1";
    j["agent"] = agent;
    j["seed"] = seed;
    ordered_json eps = ordered_json::array();
    for (const auto& r : rows) {
      ordered_json e;
      e["episode"] = r.episode;
      e["distance"] = r.distance;
      e["infractions"] = r.infractions;
      e["score"] = r.score;
      e["distinct_edges"] = r.distinct_edges;
      eps.push_back(e);
    }
    j["episodes"] = eps;
    j["mean_distance"] = mean_distance;
    j["std_distance"] = std_distance;
    j["mean_score"] = mean_score;
    j["std_score"] = std_score;
    j["agent_stats"] = agent_stats;
    return j;
  }
};

// Routeless rollouts: seeded spawn, agent actions, integrated distance,
// infraction-penalized score. Bit-reproducible for a fixed seed.
inline EvalReport evaluate(Agent& agent, const sim::TownMap& town, const EvalConfig& cfg,
                           const sim::BevSpec& bev, const sim::VehicleParams& vp = {}) {
  require(cfg.episodes >= 1 && cfg.steps >= 1, "evaluate: episodes and steps must be >= 1");
  EvalReport report;
  report.agent = agent.describe();
  report.seed = cfg.seed;
  sim::World world(town, bev, vp);
  for (int ep = 0; ep < cfg.episodes; ++ep) {
    Rng spawn_rng = Rng(cfg.seed).derive(Rng::mix(0x5A, static_cast<uint64_t>(ep)));
    Rng act_rng = Rng(cfg.seed).derive(Rng::mix(0xAC7, static_cast<uint64_t>(ep)));
    world.reset(sim::spawn_on_lane(town, spawn_rng), 0);
    EpisodeRow row;
    row.episode = ep;
    std::set<int> edges;
    for (int t = 0; t < cfg.steps; ++t) {
      const sim::Observation obs = world.render();
      const Vec2 before = world.vehicle().pos;
      const Action a = agent.act(obs, act_rng);
      const auto ev = world.step(a);
      row.distance += (world.vehicle().pos - before).norm();
      row.infractions += ev.red_light_infraction ? 1 : 0;
      const int e = town.nearest_edge(world.vehicle().pos);
      if (e >= 0) edges.insert(e);
    }
    row.score = traffic_light_score(row.distance, row.infractions);
    row.distinct_edges = static_cast<int>(edges.size());
    report.rows.push_back(row);
  }
  const double n = static_cast<double>(report.rows.size());
  for (const auto& r : report.rows) {
    report.mean_distance += r.distance / n;
    report.mean_score += r.score / n;
  }
  for (const auto& r : report.rows) {
    report.std_distance += (r.distance - report.mean_distance) * (r.distance - report.mean_distance) / n;
    report.std_score += (r.score - report.mean_score) * (r.score - report.mean_score) / n;
  }
  report.std_distance = std::sqrt(report.std_distance);
  report.std_score = std::sqrt(report.std_score);
  report.agent_stats = agent.stats();
  return report;
}

}  // namespace daibc::harness
