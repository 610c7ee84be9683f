#pragma once

#include <cstdio>
#include <filesystem>

#include "daibc/harness/agents.hpp"

namespace daibc::harness {

struct LandscapeConfig {
  int grid = 101;      // cells per action axis over [-1, 1]
  int inferences = 10; // DFO overlay points
  uint64_t seed = 1;
};

struct LandscapeResult {
  Action grid_argmin;
  double min_energy = 0.0;
  std::vector<Action> overlay;
};

// Energies over the uniform action grid for one observation, with repeated
// DFO inferences overlaid; both written as CSV.
inline LandscapeResult export_landscape(ebm::EnergyNet<float>& net, const sim::Observation& obs,
                                        const AgentContext& ctx, const LandscapeConfig& cfg,
                                        const std::filesystem::path& grid_csv,
                                        const std::filesystem::path& overlay_csv) {
  require(cfg.grid >= 2, "landscape: grid must be >= 2");
  Tensor<float> bev = bev_tensor(obs);
  Tensor<float> state = state_tensor(obs);
  auto octx = net.encode(bev, state, false);

  std::vector<Action> cells;
  cells.reserve(static_cast<size_t>(cfg.grid) * cfg.grid);
  for (int r = 0; r < cfg.grid; ++r) {
    const float steer = -1.0f + 2.0f * static_cast<float>(r) / static_cast<float>(cfg.grid - 1);
    for (int c = 0; c < cfg.grid; ++c) {
      const float acc = -1.0f + 2.0f * static_cast<float>(c) / static_cast<float>(cfg.grid - 1);
      cells.push_back({steer, acc});
    }
  }
  const auto energies = net.energies(octx, cells, static_cast<int>(cells.size()), false);

  LandscapeResult res;
  size_t best = 0;
  for (size_t i = 1; i < energies.size(); ++i)
    if (energies[i] < energies[best]) best = i;
  res.grid_argmin = cells[best];
  res.min_energy = energies[best];

  std::FILE* f = std::fopen(grid_csv.string().c_str(), "wb");
  require(f != nullptr, "landscape: cannot open " + grid_csv.string());
  std::fprintf(f, "steering,accel,energy\n");
  for (size_t i = 0; i < cells.size(); ++i)
    std::fprintf(f, "%.9g,%.9g,%.12g\n", static_cast<double>(cells[i].steering),
                 static_cast<double>(cells[i].accel), energies[i]);
  std::fclose(f);

  dfo::EnergyFn fn = [&net, &octx](std::span<const Action> acts) {
    return net.energies(octx, acts, static_cast<int>(acts.size()), false);
  };
  std::FILE* o = std::fopen(overlay_csv.string().c_str(), "wb");
  require(o != nullptr, "landscape: cannot open " + overlay_csv.string());
  std::fprintf(o, "index,steering,accel\n");
  for (int i = 0; i < cfg.inferences; ++i) {
    Rng rng = Rng(cfg.seed).derive(Rng::mix(0x1A4D, static_cast<uint64_t>(i)));
    const Action a = dfo::dfo_infer(fn, ctx.dfo, ctx.expert_actions,
                                    ctx.init_weights.probs.empty() ? nullptr : &ctx.init_weights,
                                    rng);
    res.overlay.push_back(a);
    std::fprintf(o, "%d,%.9g,%.9g\n", i, static_cast<double>(a.steering),
                 static_cast<double>(a.accel));
  }
  std::fclose(o);
  return res;
}

}  // namespace daibc::harness
