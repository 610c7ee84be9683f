#pragma once

#include <cmath>

#include "daibc/common.hpp"

namespace daibc::sim {

struct VehicleParams {
  double wheelbase = 2.5;  // m
  double max_steer = 0.5;  // rad at |steering| = 1
  double max_accel = 3.0;  // m/s^2 at accel = +1
  double max_brake = 6.0;  // m/s^2 at accel = -1
  double drag = 0.1;       // 1/s, speed decay
  double dt = 0.1;         // s
};

struct VehicleState {
  Vec2 pos;
  double heading = 0.0;  // rad, CCW from +x, normalized to (-pi, pi]
  double speed = 0.0;    // m/s, >= 0
  Action prev_action;
};

// Kinematic bicycle, explicit Euler. Speed never goes negative; braking is
// the negative-acceleration half of the action range.
inline VehicleState step_vehicle(const VehicleState& s, const Action& a,
                                 const VehicleParams& p) {
  VehicleState n = s;
  n.pos = s.pos + Vec2{std::cos(s.heading), std::sin(s.heading)} * (s.speed * p.dt);
  n.heading = normalize_angle(
      s.heading + p.dt * (s.speed / p.wheelbase) *
                      std::tan(static_cast<double>(a.steering) * p.max_steer));
  const double acc = a.accel >= 0.0f ? static_cast<double>(a.accel) * p.max_accel
                                     : static_cast<double>(a.accel) * p.max_brake;
  n.speed = std::max(0.0, s.speed + p.dt * (acc - p.drag * s.speed));
  n.prev_action = a;
  return n;
}

}  // namespace daibc::sim
