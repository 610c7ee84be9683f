#pragma once

#include <vector>

#include "daibc/sim/bev.hpp"
#include "daibc/sim/expert.hpp"
#include "daibc/sim/town.hpp"
#include "daibc/sim/vehicle.hpp"

namespace daibc::sim {

struct StepEvents {
  bool red_light_infraction = false;
  int light_id = -1;
};

// One simulated vehicle in one town. Lights are a pure function of the step
// index; a per-step state log is retained so observers can audit the history
// channels against what actually held at t-k.
class World {
 public:
  World(TownMap town, BevSpec bev, VehicleParams vp = {})
      : town_(std::move(town)), bev_(bev), vp_(vp) {
    bev_.validate();
    reset(VehicleState{}, 0);
  }

  const TownMap& town() const { return town_; }
  const BevSpec& bev_spec() const { return bev_; }
  const VehicleParams& vehicle_params() const { return vp_; }
  const VehicleState& vehicle() const { return veh_; }
  int64_t step_index() const { return step_; }

  void reset(const VehicleState& v, int64_t start_step = 0) {
    veh_ = v;
    step_ = start_step;
    log_start_ = start_step;
    light_log_.clear();
    record_lights();
    armed_.assign(town_.lights.size(), 1);
  }

  bool red_at(int light_id, int64_t step) const { return town_.light_red(light_id, step); }

  // Retained per-step light states since the last reset; light_log()[i] holds
  // the states at step log_start() + i.
  const std::vector<std::vector<char>>& light_log() const { return light_log_; }
  int64_t log_start() const { return log_start_; }

  Observation render() const {
    return render_bev(
        town_, veh_, step_, [this](int l, int64_t s) { return red_at(l, s); }, bev_);
  }

  // Advance one tick: vehicle kinematics, stop-line crossing checks, lights.
  // A red-light infraction fires at most once per approach; the latch rearms
  // once the vehicle is clear of the stop line.
  StepEvents step(const Action& a) {
    require(action_in_bounds(a), "world step: action out of bounds");
    StepEvents ev;
    const Vec2 p0 = veh_.pos;
    veh_ = step_vehicle(veh_, a, vp_);
    const Vec2 p1 = veh_.pos;
    for (size_t li = 0; li < town_.lights.size(); ++li) {
      const auto& l = town_.lights[li];
      const Vec2 sa = town_.stop_line_a(l.edge);
      const Vec2 sb = town_.stop_line_b(l.edge);
      const double clearance = point_segment_distance(p1, sa, sb);
      if (!armed_[li]) {
        if (clearance > rearm_radius_) armed_[li] = 1;
        continue;
      }
      if ((p1 - p0).norm() < 1e-9) continue;
      if (segments_intersect(p0, p1, sa, sb)) {
        // crossing must run with the lane, not across it
        if ((p1 - p0).dot(town_.edge_dir(l.edge)) > 0.0 && red_at(static_cast<int>(li), step_)) {
          ev.red_light_infraction = true;
          ev.light_id = static_cast<int>(li);
        }
        armed_[li] = 0;
      }
    }
    ++step_;
    record_lights();
    return ev;
  }

 private:
  void record_lights() {
    std::vector<char> row(town_.lights.size());
    for (size_t li = 0; li < town_.lights.size(); ++li)
      row[li] = red_at(static_cast<int>(li), step_) ? 1 : 0;
    light_log_.push_back(std::move(row));
  }

  TownMap town_;
  BevSpec bev_;
  VehicleParams vp_;
  VehicleState veh_;
  int64_t step_ = 0;
  int64_t log_start_ = 0;
  std::vector<std::vector<char>> light_log_;
  std::vector<char> armed_;
  double rearm_radius_ = 12.0;
};

// Seeded spawn on a random lane, at rest, heading along the lane.
inline VehicleState spawn_on_lane(const TownMap& town, Rng& rng) {
  const int e = rng.below(static_cast<int>(town.edges.size()));
  const double s = rng.uniform(0.1, 0.6) * town.lane_len(e);
  VehicleState v;
  v.pos = town.lane_point(e, s);
  const Vec2 d = town.edge_dir(e);
  v.heading = std::atan2(d.y, d.x);
  v.speed = 0.0;
  return v;
}

}  // namespace daibc::sim
