#pragma once

#include <array>
#include <functional>
#include <vector>

#include "daibc/sim/town.hpp"
#include "daibc/sim/vehicle.hpp"
#include "daibc/tensor.hpp"

namespace daibc::sim {

inline constexpr int kBevChannels = 5;
inline constexpr double kSpeedNorm = 10.0;  // m/s scale for the state vector
inline constexpr std::array<int, 3> kLightHistorySteps = {1, 9, 16};

struct BevSpec {
  int h = 64;
  int w = 64;
  double phi = 0.5;  // meters per pixel

  void validate() const {
    require(h > 0 && w > 0 && phi > 0, "bev spec: dims and phi must be positive");
  }
};

// Ego-centric observation: five binary channels (drivable area, lane
// boundaries, red-light stop lines at t-1 / t-9 / t-16) plus the scalar
// state vector [speed / 10, prev steering, prev accel].
struct Observation {
  Tensor<float> bev;  // [5, H, W], entries 0 or 1
  std::array<float, 3> state{};
};

using LightStateFn = std::function<bool(int light_id, int64_t step)>;

// Heading-up, ego-centered rasterization. Row 0 is directly ahead; column
// offsets grow to the vehicle's right; the ego sits at the grid center.
inline Observation render_bev(const TownMap& town, const VehicleState& veh, int64_t step,
                              const LightStateFn& red_at, const BevSpec& spec) {
  spec.validate();
  Observation obs;
  obs.bev = Tensor<float>({kBevChannels, spec.h, spec.w});
  obs.state = {static_cast<float>(veh.speed / kSpeedNorm), veh.prev_action.steering,
               veh.prev_action.accel};

  const Vec2 fwd{std::cos(veh.heading), std::sin(veh.heading)};
  const Vec2 right = fwd.right();
  const double view_radius =
      0.5 * spec.phi * std::sqrt(static_cast<double>(spec.h * spec.h + spec.w * spec.w)) + 1.0;

  // cull geometry to the view disk
  struct Seg {
    Vec2 a, b;
  };
  std::vector<Seg> axes;       // street axes (drivable test)
  std::vector<Seg> borders;    // road boundary lines
  std::vector<Vec2> disks;     // intersection disks
  std::vector<std::array<Seg, 3>> stops;  // stop lines per history channel
  std::vector<char> stop_red;             // 3 flags per light, flattened

  for (size_t e = 0; e < town.edges.size(); e += 2) {
    const Vec2& a = town.nodes[static_cast<size_t>(town.edges[e].from)];
    const Vec2& b = town.nodes[static_cast<size_t>(town.edges[e].to)];
    if (point_segment_distance(veh.pos, a, b) > view_radius + town.road_half) continue;
    axes.push_back({a, b});
    const Vec2 d = (b - a).normalized();
    const Vec2 off = d.right() * town.road_half;
    const Vec2 ta = a + d * town.node_radius, tb = b - d * town.node_radius;
    if ((tb - ta).dot(d) > 0) {
      borders.push_back({ta + off, tb + off});
      borders.push_back({ta - off, tb - off});
    }
  }
  for (const Vec2& n : town.nodes)
    if ((veh.pos - n).norm() <= view_radius + town.node_radius) disks.push_back(n);
  for (size_t li = 0; li < town.lights.size(); ++li) {
    const auto& l = town.lights[li];
    const Vec2 sa = town.stop_line_a(l.edge), sb = town.stop_line_b(l.edge);
    if (point_segment_distance(veh.pos, sa, sb) > view_radius) continue;
    bool any = false;
    std::array<char, 3> flags{};
    for (size_t k = 0; k < kLightHistorySteps.size(); ++k) {
      flags[k] = red_at(static_cast<int>(li), step - kLightHistorySteps[k]) ? 1 : 0;
      any = any || flags[k];
    }
    if (!any) continue;
    stops.push_back({Seg{sa, sb}, Seg{sa, sb}, Seg{sa, sb}});
    for (char f : flags) stop_red.push_back(f);
  }

  const double border_thick = spec.phi * 0.6;
  const double stop_thick = spec.phi * 0.75;
  float* ch0 = obs.bev.data();
  float* ch1 = ch0 + static_cast<int64_t>(spec.h) * spec.w;
  for (int r = 0; r < spec.h; ++r) {
    const double f = (spec.h / 2.0 - (r + 0.5)) * spec.phi;
    for (int c = 0; c < spec.w; ++c) {
      const double lat = ((c + 0.5) - spec.w / 2.0) * spec.phi;
      const Vec2 p = veh.pos + fwd * f + right * lat;
      const int64_t idx = static_cast<int64_t>(r) * spec.w + c;

      bool driv = false;
      for (const Seg& s : axes)
        if (point_segment_distance(p, s.a, s.b) <= town.road_half) {
          driv = true;
          break;
        }
      if (!driv)
        for (const Vec2& n : disks)
          if ((p - n).norm() <= town.node_radius) {
            driv = true;
            break;
          }
      if (driv) ch0[idx] = 1.0f;

      for (const Seg& s : borders)
        if (point_segment_distance(p, s.a, s.b) <= border_thick) {
          ch1[idx] = 1.0f;
          break;
        }

      for (size_t si = 0; si < stops.size(); ++si) {
        const Seg& s = stops[si][0];
        if (point_segment_distance(p, s.a, s.b) > stop_thick) continue;
        for (size_t k = 0; k < 3; ++k)
          if (stop_red[si * 3 + k])
            obs.bev[(2 + static_cast<int64_t>(k)) * spec.h * spec.w + idx] = 1.0f;
      }
    }
  }
  return obs;
}

}  // namespace daibc::sim
