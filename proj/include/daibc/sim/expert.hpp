#pragma once

#include <cmath>
#include <deque>
#include <vector>

#include "daibc/rng.hpp"
#include "daibc/sim/town.hpp"
#include "daibc/sim/vehicle.hpp"

namespace daibc::sim {

struct ExpertParams {
  double cruise_speed = 6.0;   // m/s
  double turn_speed = 3.5;     // m/s through intersections
  double spacing = 1.0;        // waypoint spacing, m
  double lookahead_gain = 0.6;
  double lookahead_base = 2.0;
  double lookahead_min = 2.5;
  double lookahead_max = 7.0;
  double stop_margin = 1.5;    // stop this far before the line
  double comfort_decel = 2.5;  // m/s^2 used for the approach profile
  double kp_speed = 0.5;
  double plan_horizon = 35.0;  // extend the plan below this remaining length
  double turn_slow_dist = 9.0;
};

// Dense-waypoint driver: pure-pursuit steering along lane centerlines with a
// PID-style speed loop, stopping at red lights. At every intersection entry
// the plan extends by a uniformly random legal branch; that choice is the
// source of multimodal demonstrations.
class ExpertDriver {
 public:
  struct Waypoint {
    Vec2 p;
    bool turn = false;   // part of an intersection curve
    int light = -1;      // stop line of this light sits at this waypoint
  };

  ExpertDriver(const TownMap* town, const VehicleParams* vp, const ExpertParams& ep,
               uint64_t seed)
      : town_(town), vp_(vp), ep_(ep), rng_(Rng::mix(seed, 0xE1)) {}

  // Place the plan on a lane; the vehicle should start near lane_point(edge, s).
  void reset(int edge, double s_along) {
    plan_.clear();
    cursor_ = 0;
    current_edge_ = edge;
    append_lane_tail(edge, s_along);
  }

  int current_edge() const { return current_edge_; }

  // Uniform choice among legal continuations; separated out for tests.
  static int choose_branch(const TownMap& town, int incoming_edge, Rng& rng) {
    auto conts = town.continuations(incoming_edge);
    return conts[static_cast<size_t>(rng.below(static_cast<int>(conts.size())))];
  }

  Action act(const VehicleState& veh, int64_t step, const LightStateFn& red_at) {
    ensure_plan(veh);
    advance_cursor(veh);

    // pure pursuit
    const double ld = std::clamp(ep_.lookahead_gain * veh.speed + ep_.lookahead_base,
                                 ep_.lookahead_min, ep_.lookahead_max);
    const Vec2 target = point_at_arc(ld);
    const Vec2 rel = rotate(target - veh.pos, -veh.heading);
    const double d2 = std::max(1.0, rel.x * rel.x + rel.y * rel.y);
    const double curvature = 2.0 * rel.y / d2;
    const double steer_rad = std::atan(curvature * vp_->wheelbase);
    const double steering = std::clamp(steer_rad / vp_->max_steer, -1.0, 1.0);

    // speed target: cruise, slowed for turns, zero behind a red stop line
    double v_target = ep_.cruise_speed;
    const double turn_d = arc_to_next_turn();
    if (turn_d < ep_.turn_slow_dist) v_target = std::min(v_target, ep_.turn_speed);
    double stop_d;
    const int light = next_light(&stop_d);
    if (light >= 0 && red_at(light, step)) {
      const double run = stop_d - ep_.stop_margin;
      const double v_allow = run > 0 ? std::sqrt(2.0 * ep_.comfort_decel * run) : 0.0;
      v_target = std::min(v_target, v_allow);
    }

    double accel = ep_.kp_speed * (v_target - veh.speed);
    if (v_target > 0.1) accel += vp_->drag * veh.speed / vp_->max_accel;
    // smooth actuator shaping instead of a hard clamp: the recorded pedal
    // command saturates asymptotically and never sits on the action bound
    accel = 0.95 * std::tanh(accel / 0.95);
    // wheels stay straight while holding at a red light
    const double steer_cmd = (v_target < 0.05 && veh.speed < 0.5) ? 0.0 : steering;
    return clip_action({static_cast<float>(steer_cmd), static_cast<float>(accel)});
  }

 private:
  void append_lane_tail(int edge, double from_s) {
    const double len = town_->lane_len(edge);
    const int light = town_->edge_light[static_cast<size_t>(edge)];
    for (double s = from_s; s < len; s += ep_.spacing)
      plan_.push_back({town_->lane_point(edge, s), false, -1});
    // lane end is the stop line position for this edge's light
    plan_.push_back({town_->lane_end(edge), false, light});
  }

  void append_branch() {
    const int next = choose_branch(*town_, current_edge_, rng_);
    // connect lane end to the next lane start with a quadratic curve through
    // the intersection; straight-through degenerates to a line
    const Vec2 a = town_->lane_end(current_edge_);
    const Vec2 b = town_->lane_start(next);
    const Vec2 da = town_->edge_dir(current_edge_);
    const Vec2 db = town_->edge_dir(next);
    Vec2 ctrl = (a + b) * 0.5;
    const double denom = da.cross(db);
    if (std::abs(denom) > 1e-9) {
      const double t = (b - a).cross(db) / denom;
      ctrl = a + da * t;
    }
    const double approx_len = (ctrl - a).norm() + (b - ctrl).norm();
    const int n = std::max(3, static_cast<int>(approx_len / ep_.spacing));
    const bool is_turn = std::abs(denom) > 1e-9;
    for (int i = 1; i <= n; ++i) {
      const double t = static_cast<double>(i) / (n + 1);
      const Vec2 q = a * ((1 - t) * (1 - t)) + ctrl * (2 * t * (1 - t)) + b * (t * t);
      plan_.push_back({q, is_turn, -1});
    }
    current_edge_ = next;
    append_lane_tail(next, 0.0);
  }

  void ensure_plan(const VehicleState& veh) {
    if (plan_.empty()) {
      const int e = town_->nearest_edge(veh.pos);
      reset(e >= 0 ? e : 0, 0.0);
    }
    while (remaining_arc() < ep_.plan_horizon) append_branch();
    // drop consumed waypoints, keeping a short tail behind the cursor
    while (cursor_ > 20) {
      plan_.pop_front();
      --cursor_;
    }
  }

  void advance_cursor(const VehicleState& veh) {
    size_t best = cursor_;
    double best_d = (plan_[cursor_].p - veh.pos).norm();
    const size_t end = std::min(plan_.size(), cursor_ + 50);
    for (size_t i = cursor_; i < end; ++i) {
      const double d = (plan_[i].p - veh.pos).norm();
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    cursor_ = best;
  }

  double remaining_arc() const {
    double acc = 0.0;
    for (size_t i = cursor_; i + 1 < plan_.size(); ++i) acc += (plan_[i + 1].p - plan_[i].p).norm();
    return acc;
  }

  Vec2 point_at_arc(double arc) const {
    double acc = 0.0;
    for (size_t i = cursor_; i + 1 < plan_.size(); ++i) {
      acc += (plan_[i + 1].p - plan_[i].p).norm();
      if (acc >= arc) return plan_[i + 1].p;
    }
    return plan_.back().p;
  }

  double arc_to_next_turn() const {
    double acc = 0.0;
    for (size_t i = cursor_; i + 1 < plan_.size(); ++i) {
      if (plan_[i].turn) return acc;
      acc += (plan_[i + 1].p - plan_[i].p).norm();
      if (acc > 1e3) break;
    }
    return 1e9;
  }

  // Nearest stop line strictly ahead on the plan; returns light id or -1.
  int next_light(double* dist) const {
    double acc = 0.0;
    for (size_t i = cursor_; i + 1 < plan_.size(); ++i) {
      if (plan_[i].light >= 0 && i > cursor_) {
        *dist = acc;
        return plan_[i].light;
      }
      acc += (plan_[i + 1].p - plan_[i].p).norm();
      if (acc > 60.0) break;
    }
    *dist = 1e9;
    return -1;
  }

  const TownMap* town_;
  const VehicleParams* vp_;
  ExpertParams ep_;
  Rng rng_;
  std::deque<Waypoint> plan_;
  size_t cursor_ = 0;
  int current_edge_ = 0;
};

}  // namespace daibc::sim
