#include <catch2/catch_amalgamated.hpp>

#include "daibc/sim/dataset.hpp"
#include "daibc/sim/world.hpp"
#include "testutil.hpp"

using namespace daibc;
using namespace daibc::sim;
using Catch::Matchers::WithinAbs;

namespace {
// Open straight road along +x; degenerate on purpose (no intersections).
TownMap straight_road() {
  TownMap t;
  t.seed = 0x57;
  t.nodes = {{-500, 0}, {500, 0}};
  t.node_out = {{0}, {1}};
  t.edges = {{0, 1}, {1, 0}};
  t.edge_light = {-1, -1};
  return t;
}

LightStateFn never_red() {
  return [](int, int64_t) { return false; };
}
}  // namespace

TEST_CASE("drivable channel is mirror-symmetric on a straight road") {
  TownMap t = straight_road();
  VehicleState v;
  v.pos = {0, 0};  // on the road axis
  v.heading = 0.0;
  BevSpec spec{64, 64, 0.5};
  Observation obs = render_bev(t, v, 100, never_red(), spec);
  const float* ch0 = obs.bev.data();
  int drivable_cells = 0;
  for (int r = 0; r < 64; ++r)
    for (int c = 0; c < 64; ++c) {
      CHECK(ch0[r * 64 + c] == ch0[r * 64 + (63 - c)]);
      drivable_cells += ch0[r * 64 + c] > 0 ? 1 : 0;
    }
  CHECK(drivable_cells > 64 * 10);  // the road actually shows up
  // lane boundary channel mirrors too
  const float* ch1 = ch0 + 64 * 64;
  for (int r = 0; r < 64; ++r)
    for (int c = 0; c < 64; ++c) CHECK(ch1[r * 64 + c] == ch1[r * 64 + (63 - c)]);
}

TEST_CASE("bev cells are strictly binary and state vector is scaled") {
  TownMap t = make_t_fixture_town();
  VehicleState v;
  v.pos = t.lane_point(0, 10.0);
  v.heading = 1.0;
  v.speed = 5.0;
  v.prev_action = {0.25f, -0.5f};
  Observation obs = render_bev(t, v, 200, never_red(), BevSpec{64, 64, 0.5});
  for (int64_t i = 0; i < obs.bev.numel(); ++i) CHECK((obs.bev[i] == 0.0f || obs.bev[i] == 1.0f));
  CHECK_THAT(obs.state[0], WithinAbs(0.5, 1e-6));
  CHECK(obs.state[1] == 0.25f);
  CHECK(obs.state[2] == -0.5f);
}

TEST_CASE("all lights green for 16 steps leaves history channels empty") {
  TownMap t = make_t_fixture_town();
  World world(t, BevSpec{64, 64, 0.5});
  VehicleState v;
  // right at a gated intersection entry so stop lines are in view
  int edge = -1;
  for (size_t e = 0; e < t.edges.size(); ++e)
    if (t.edge_light[e] >= 0) edge = static_cast<int>(e);
  v.pos = t.lane_point(edge, t.lane_len(edge) - 5.0);
  const Vec2 d = t.edge_dir(edge);
  v.heading = std::atan2(d.y, d.x);
  world.reset(v, 40);  // steps 24..40 all green under phase 0
  Observation obs = world.render();
  const int64_t hw = 64 * 64;
  for (int64_t i = 2 * hw; i < 5 * hw; ++i) CHECK(obs.bev[i] == 0.0f);
}

TEST_CASE("red history channels follow the retained light log") {
  TownMap t = make_t_fixture_town();
  World world(t, BevSpec{64, 64, 0.5});
  int edge = -1;
  for (size_t e = 0; e < t.edges.size(); ++e)
    if (t.edge_light[e] >= 0) edge = static_cast<int>(e);
  VehicleState v;
  v.pos = t.lane_point(edge, t.lane_len(edge) - 5.0);
  const Vec2 d = t.edge_dir(edge);
  v.heading = std::atan2(d.y, d.x);
  world.reset(v, 70);
  for (int step = 0; step < 70; ++step) {
    Observation a = world.render();
    // re-render against the retained log instead of the cycle formula
    const auto& log = world.light_log();
    const int64_t t0 = world.log_start();
    Observation b = render_bev(
        t, world.vehicle(), world.step_index(),
        [&](int l, int64_t s) {
          if (s >= t0 && s < t0 + static_cast<int64_t>(log.size()))
            return static_cast<bool>(log[static_cast<size_t>(s - t0)][static_cast<size_t>(l)]);
          return t.light_red(l, s);
        },
        world.bev_spec());
    for (int64_t i = 0; i < a.bev.numel(); ++i) REQUIRE(a.bev[i] == b.bev[i]);
    world.step({0.0f, 0.0f});
  }
}

TEST_CASE("rotating world and vehicle together leaves the BEV nearly unchanged") {
  TownMap t = make_t_fixture_town();
  const double ang = 0.53;
  TownMap rot = t;
  for (Vec2& n : rot.nodes) n = rotate(n, ang);
  VehicleState v;
  v.pos = t.lane_point(4, 12.0);
  v.heading = std::atan2(t.edge_dir(4).y, t.edge_dir(4).x);
  VehicleState vr;
  vr.pos = rotate(v.pos, ang);
  vr.heading = normalize_angle(v.heading + ang);
  BevSpec spec{64, 64, 0.5};
  Observation a = render_bev(t, v, 300, never_red(), spec);
  Observation b = render_bev(rot, vr, 300, never_red(), spec);
  int64_t diff = 0;
  for (int64_t i = 0; i < a.bev.numel(); ++i) diff += a.bev[i] != b.bev[i] ? 1 : 0;
  CHECK(static_cast<double>(diff) / static_cast<double>(a.bev.numel()) <= 0.02);
}

TEST_CASE("expert drives straight on a straight lane and accelerates to cruise") {
  TownMap t = straight_road();
  VehicleParams vp;
  ExpertParams ep;
  ExpertDriver expert(&t, &vp, ep, 3);
  expert.reset(0, 100.0);
  VehicleState v;
  v.pos = t.lane_point(0, 100.0);
  v.heading = 0.0;
  World world(t, BevSpec{16, 16, 1.0}, vp);
  world.reset(v, 0);
  for (int i = 0; i < 120; ++i) {
    const Action a = expert.act(world.vehicle(), world.step_index(), never_red());
    CHECK(std::abs(a.steering) < 0.05);
    if (world.vehicle().speed < ep.cruise_speed - 0.5) CHECK(a.accel > 0.0f);
    world.step(a);
  }
  CHECK(world.vehicle().speed > 4.5);
  CHECK(world.vehicle().speed < 7.5);
}

TEST_CASE("expert brakes for a red light five meters ahead") {
  TownMap t = make_t_fixture_town();
  int edge = -1;
  for (size_t e = 0; e < t.edges.size(); ++e)
    if (t.edge_light[e] >= 0) edge = static_cast<int>(e);
  VehicleParams vp;
  ExpertParams ep;
  ExpertDriver expert(&t, &vp, ep, 5);
  expert.reset(edge, 2.0);
  VehicleState v;
  v.pos = t.lane_point(edge, t.lane_len(edge) - 5.0);
  const Vec2 d = t.edge_dir(edge);
  v.heading = std::atan2(d.y, d.x);
  v.speed = 6.0;
  const Action a =
      expert.act(v, 85, [&t](int l, int64_t s) { return t.light_red(l, s); });  // red window
  CHECK(a.accel < 0.0f);
}

TEST_CASE("expert stops before a red stop line and proceeds on green") {
  TownMap t = make_t_fixture_town();
  int edge = -1;
  for (size_t e = 0; e < t.edges.size(); ++e)
    if (t.edge_light[e] >= 0) edge = static_cast<int>(e);
  VehicleParams vp;
  ExpertParams ep;
  World world(t, BevSpec{16, 16, 1.0}, vp);
  ExpertDriver expert(&t, &vp, ep, 6);
  expert.reset(edge, t.lane_len(edge) - 12.0);
  VehicleState v;
  v.pos = t.lane_point(edge, t.lane_len(edge) - 12.0);
  const Vec2 d = t.edge_dir(edge);
  v.heading = std::atan2(d.y, d.x);
  v.speed = 5.0;
  world.reset(v, 80);  // red window just began; the line is 12 m ahead
  int infractions = 0;
  bool stopped_during_red = false;
  for (int i = 0; i < 220; ++i) {
    const Action a = expert.act(world.vehicle(), world.step_index(),
                                [&world](int l, int64_t s) { return world.red_at(l, s); });
    infractions += world.step(a).red_light_infraction ? 1 : 0;
    if (world.vehicle().speed < 0.05 && world.red_at(t.edge_light[static_cast<size_t>(edge)],
                                                     world.step_index()))
      stopped_during_red = true;
  }
  CHECK(infractions == 0);
  CHECK(stopped_during_red);
  // after the cycle returns to green the expert moves again
  CHECK(world.vehicle().speed > 1.0);
}

TEST_CASE("branch choice at the symmetric T is 50/50") {
  TownMap t = make_t_fixture_town();
  // middle rung edge arriving at node 1 (degree 3)
  int edge = -1;
  for (size_t e = 0; e < t.edges.size(); ++e)
    if (t.edges[e].to == 1 && t.edges[e].from == 4) edge = static_cast<int>(e);
  REQUIRE(edge >= 0);
  auto conts = t.continuations(edge);
  REQUIRE(conts.size() == 2);
  Rng rng(123);
  int first = 0;
  const int n = 1000;
  for (int i = 0; i < n; ++i)
    first += ExpertDriver::choose_branch(t, edge, rng) == conts[0] ? 1 : 0;
  CHECK(testutil::binomial_3sigma(static_cast<double>(first) / n, 0.5, n));
}

TEST_CASE("collect_dataset is deterministic, in-bounds, and strictly binary") {
  testutil::TempDir tmp("collect");
  TownMap t = make_t_fixture_town();
  DatasetConfig cfg;
  cfg.episodes = 2;
  cfg.steps_per_episode = 120;
  cfg.seed = 9;
  cfg.bev = BevSpec{32, 32, 0.5};
  Dataset a = collect_dataset(t, cfg);
  Dataset b = collect_dataset(t, cfg);
  CHECK(a.count == 240);
  REQUIRE(a.obs.size() == b.obs.size());
  CHECK(a.obs == b.obs);
  for (const Action& act : a.actions) CHECK(action_in_bounds(act));
  for (int64_t i = 0; i < a.count; ++i)
    for (float x : a.bev_row(i)) CHECK((x == 0.0f || x == 1.0f));

  save_dataset(tmp.path / "d1", a);
  save_dataset(tmp.path / "d2", b);
  for (const char* f : {"manifest.json", "obs.bin", "act.bin", "meta.csv"})
    CHECK(read_text_file(tmp.path / "d1" / f) == read_text_file(tmp.path / "d2" / f));

  Dataset loaded = load_dataset(tmp.path / "d1");
  CHECK(loaded.count == a.count);
  CHECK(loaded.obs == a.obs);
  CHECK(loaded.meta.size() == a.meta.size());
}

TEST_CASE("expert trajectories stay on the drivable area") {
  TownMap t = make_t_fixture_town();
  DatasetConfig cfg;
  cfg.episodes = 3;
  cfg.steps_per_episode = 400;
  cfg.seed = 14;
  cfg.bev = BevSpec{16, 16, 1.0};
  Dataset d = collect_dataset(t, cfg);
  for (const MetaRow& r : d.meta) CHECK(t.drivable({r.x, r.y}));
}

TEST_CASE("demonstrations at T-entries are bimodal in steering") {
  TownMap t = make_t_fixture_town();
  DatasetConfig cfg;
  cfg.episodes = 10;
  cfg.steps_per_episode = 500;
  cfg.seed = 21;
  cfg.bev = BevSpec{16, 16, 1.0};
  Dataset d = collect_dataset(t, cfg);
  // intersection-entry states: on the rung lane approaching a node where
  // both continuations are turns, still aligned with the lane (not mid-turn)
  int left = 0, right = 0, total = 0;
  for (int64_t i = 0; i < d.count; ++i) {
    const MetaRow& m = d.meta[static_cast<size_t>(i)];
    const Vec2 p{m.x, m.y};
    const int e = t.nearest_edge(p);
    if (e < 0) continue;
    const int to = t.edges[static_cast<size_t>(e)].to;
    if (t.degree(to) != 3) continue;
    auto conts = t.continuations(e);
    if (conts.size() != 2) continue;
    const Vec2 de = t.edge_dir(e);
    bool both_turns = true;
    for (int c : conts)
      if (de.dot(t.edge_dir(c)) > 0.7) both_turns = false;
    if (!both_turns) continue;
    const Vec2 h{std::cos(m.heading), std::sin(m.heading)};
    if (h.dot(de) < 0.97) continue;
    if (point_segment_distance(p, t.lane_start(e), t.lane_end(e)) > 1.0) continue;
    const double dist_to_node = (t.nodes[static_cast<size_t>(to)] - p).norm();
    if (dist_to_node > t.node_radius + 3.5 || dist_to_node < t.node_radius - 2.0) continue;
    if (m.speed < 0.5) continue;
    const float s = d.actions[static_cast<size_t>(i)].steering;
    ++total;
    // by this point the branch is committed; the sign separates the clusters
    if (s > 0.015f) ++left;
    if (s < -0.015f) ++right;
  }
  INFO("total=" << total << " left=" << left << " right=" << right);
  REQUIRE(total > 40);
  CHECK(left >= static_cast<int>(0.3 * total));
  CHECK(right >= static_cast<int>(0.3 * total));
}
