#pragma once

#include <cstdio>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "daibc/blobfile.hpp"
#include "daibc/sim/world.hpp"

namespace daibc::sim {

struct DatasetConfig {
  int episodes = 8;
  int steps_per_episode = 500;
  uint64_t seed = 1;
  BevSpec bev;
  VehicleParams vehicle;
  ExpertParams expert;
};

struct MetaRow {
  int64_t step = 0;  // step within the episode
  double x = 0, y = 0, heading = 0, speed = 0;
  int light = -1;  // state of the current lane's light: -1 none, 0 green, 1 red
  int infraction = 0;
};

// Demonstration dataset in the flat on-disk layout:
//   manifest.json  counts, seeds, strides, town hash, render config
//   obs.bin        float32 LE, one row per record: 5*H*W BEV cells + 3 state
//   act.bin        float32 LE, one row per record: steering, accel
//   meta.csv       step,x,y,heading,speed,light,infraction
struct Dataset {
  BevSpec bev;
  int state_dim = 3;
  int64_t count = 0;
  std::vector<float> obs;
  std::vector<Action> actions;
  std::vector<MetaRow> meta;
  ordered_json manifest;

  int64_t bev_numel() const { return static_cast<int64_t>(kBevChannels) * bev.h * bev.w; }
  int64_t obs_stride() const { return bev_numel() + state_dim; }

  std::span<const float> obs_row(int64_t i) const {
    return {obs.data() + i * obs_stride(), static_cast<size_t>(obs_stride())};
  }
  std::span<const float> bev_row(int64_t i) const {
    return {obs.data() + i * obs_stride(), static_cast<size_t>(bev_numel())};
  }
  std::span<const float> state_row(int64_t i) const {
    return {obs.data() + i * obs_stride() + bev_numel(), static_cast<size_t>(state_dim)};
  }
};

inline ordered_json dataset_manifest(const DatasetConfig& cfg, const TownMap& town,
                                     int64_t samples) {
  ordered_json m;
  m["format"] = "daibc-dataset-v1";
  m["seed"] = cfg.seed;
  m["episodes"] = cfg.episodes;
  m["steps_per_episode"] = cfg.steps_per_episode;
  m["samples"] = samples;
  m["dt"] = cfg.vehicle.dt;
  m["phi"] = cfg.bev.phi;
  m["bev_channels"] = kBevChannels;
  m["bev_h"] = cfg.bev.h;
  m["bev_w"] = cfg.bev.w;
  m["state_dim"] = 3;
  m["obs_stride"] = static_cast<int64_t>(kBevChannels) * cfg.bev.h * cfg.bev.w + 3;
  m["act_stride"] = 2;
  m["alignment"] = "heading-up";
  m["speed_norm"] = kSpeedNorm;
  m["town_hash"] = hex64(town_structural_hash(town));
  m["cruise_speed"] = cfg.expert.cruise_speed;
  m["turn_speed"] = cfg.expert.turn_speed;
  return m;
}

// Deterministic expert rollouts: same seed, same town, byte-identical files.
inline Dataset collect_dataset(const TownMap& town, const DatasetConfig& cfg) {
  require(cfg.episodes >= 1 && cfg.steps_per_episode >= 1,
          "collect: episodes and steps must be >= 1");
  Dataset ds;
  ds.bev = cfg.bev;
  ds.count = static_cast<int64_t>(cfg.episodes) * cfg.steps_per_episode;
  ds.obs.reserve(static_cast<size_t>(ds.count * ds.obs_stride()));
  ds.actions.reserve(static_cast<size_t>(ds.count));
  ds.meta.reserve(static_cast<size_t>(ds.count));

  Rng master(cfg.seed);
  World world(town, cfg.bev, cfg.vehicle);
  for (int ep = 0; ep < cfg.episodes; ++ep) {
    Rng spawn_rng = master.derive(Rng::mix(0x5A, static_cast<uint64_t>(ep)));
    VehicleState start = spawn_on_lane(world.town(), spawn_rng);
    world.reset(start, 0);
    ExpertDriver expert(&world.town(), &world.vehicle_params(), cfg.expert,
                        Rng::mix(cfg.seed, static_cast<uint64_t>(ep) + 1));
    expert.reset(world.town().nearest_edge(start.pos), 0.0);
    for (int t = 0; t < cfg.steps_per_episode; ++t) {
      Observation obs = world.render();
      const Action a = expert.act(world.vehicle(), world.step_index(),
                                  [&world](int l, int64_t s) { return world.red_at(l, s); });
      const VehicleState& v = world.vehicle();
      MetaRow row;
      row.step = t;
      row.x = v.pos.x;
      row.y = v.pos.y;
      row.heading = v.heading;
      row.speed = v.speed;
      const int e = world.town().nearest_edge(v.pos);
      const int light = e >= 0 ? world.town().edge_light[static_cast<size_t>(e)] : -1;
      row.light = light >= 0 ? (world.red_at(light, world.step_index()) ? 1 : 0) : -1;
      StepEvents ev = world.step(a);
      row.infraction = ev.red_light_infraction ? 1 : 0;

      ds.obs.insert(ds.obs.end(), obs.bev.data(), obs.bev.data() + obs.bev.numel());
      ds.obs.insert(ds.obs.end(), obs.state.begin(), obs.state.end());
      ds.actions.push_back(a);
      ds.meta.push_back(row);
    }
  }
  ds.manifest = dataset_manifest(cfg, town, ds.count);
  return ds;
}

namespace detail {
inline void write_floats(const std::filesystem::path& path, std::span<const float> xs) {
  std::FILE* f = std::fopen(path.string().c_str(), "wb");
  require(f != nullptr, "dataset: cannot open " + path.string());
  if (!xs.empty()) {
    const size_t n = std::fwrite(xs.data(), sizeof(float), xs.size(), f);
    require(n == xs.size(), "dataset: short write to " + path.string());
  }
  std::fclose(f);
}

inline std::vector<float> read_floats(const std::filesystem::path& path, int64_t expect) {
  std::FILE* f = std::fopen(path.string().c_str(), "rb");
  require(f != nullptr, "dataset: cannot open " + path.string());
  std::vector<float> out(static_cast<size_t>(expect));
  const size_t n = std::fread(out.data(), sizeof(float), out.size(), f);
  std::fclose(f);
  require(n == out.size(), "dataset: " + path.string() + " shorter than manifest claims");
  return out;
}
}  // namespace detail

inline void save_dataset(const std::filesystem::path& dir, const Dataset& ds) {
  std::filesystem::create_directories(dir);
  write_text_file(dir / "manifest.json", ds.manifest.dump(2) + "\n");
  detail::write_floats(dir / "obs.bin", ds.obs);
  std::vector<float> acts;
  acts.reserve(ds.actions.size() * 2);
  for (const Action& a : ds.actions) {
    acts.push_back(a.steering);
    acts.push_back(a.accel);
  }
  detail::write_floats(dir / "act.bin", acts);
  std::FILE* f = std::fopen((dir / "meta.csv").string().c_str(), "wb");
  require(f != nullptr, "dataset: cannot open meta.csv");
  std::fprintf(f, "step,x,y,heading,speed,light,infraction\n");
  for (const MetaRow& r : ds.meta)
    std::fprintf(f, "%lld,%.9g,%.9g,%.9g,%.9g,%d,%d\n", static_cast<long long>(r.step), r.x, r.y,
                 r.heading, r.speed, r.light, r.infraction);
  std::fclose(f);
}

inline Dataset load_dataset(const std::filesystem::path& dir) {
  ordered_json m;
  try {
    m = ordered_json::parse(read_text_file(dir / "manifest.json"));
  } catch (const ordered_json::parse_error& e) {
    throw InputError("dataset: invalid manifest.json in " + dir.string() + ": " + e.what());
  }
  require(m.value("format", "") == "daibc-dataset-v1", "dataset: unknown manifest format");
  Dataset ds;
  ds.bev.h = m.at("bev_h").get<int>();
  ds.bev.w = m.at("bev_w").get<int>();
  ds.bev.phi = m.at("phi").get<double>();
  ds.state_dim = m.at("state_dim").get<int>();
  ds.count = m.at("samples").get<int64_t>();
  require(m.at("bev_channels").get<int>() == kBevChannels, "dataset: channel count mismatch");
  require(m.at("obs_stride").get<int64_t>() == ds.obs_stride(), "dataset: stride mismatch");
  ds.obs = detail::read_floats(dir / "obs.bin", ds.count * ds.obs_stride());
  std::vector<float> acts = detail::read_floats(dir / "act.bin", ds.count * 2);
  ds.actions.resize(static_cast<size_t>(ds.count));
  for (int64_t i = 0; i < ds.count; ++i) {
    ds.actions[static_cast<size_t>(i)] = {acts[static_cast<size_t>(2 * i)],
                                          acts[static_cast<size_t>(2 * i + 1)]};
    require(action_in_bounds(ds.actions[static_cast<size_t>(i)]),
            "dataset: recorded action out of bounds");
  }
  ds.manifest = m;
  // meta.csv is auxiliary; parse the numeric columns for consumers that care
  const std::string csv = read_text_file(dir / "meta.csv");
  size_t pos = csv.find('\n');
  while (pos != std::string::npos && pos + 1 < csv.size()) {
    const size_t end = csv.find('\n', pos + 1);
    const std::string line = csv.substr(pos + 1, end == std::string::npos ? end : end - pos - 1);
    if (!line.empty()) {
      MetaRow r;
      long long step = 0;
      std::sscanf(line.c_str(), "%lld,%lf,%lf,%lf,%lf,%d,%d", &step, &r.x, &r.y, &r.heading,
                  &r.speed, &r.light, &r.infraction);
      r.step = step;
      ds.meta.push_back(r);
    }
    pos = end;
  }
  require(static_cast<int64_t>(ds.meta.size()) == ds.count, "dataset: meta.csv row count mismatch");
  return ds;
}

}  // namespace daibc::sim
