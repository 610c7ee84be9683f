#pragma once

#include <cstdio>
#include <filesystem>

#include "daibc/harness/evaluate.hpp"
#include "daibc/harness/landscape.hpp"
#include "daibc/harness/probe.hpp"
#include "daibc/harness/train.hpp"
#include "daibc/sim/obs_io.hpp"

namespace daibc::harness {

// One self-contained comparison run on the canonical T fixture.
struct ReproProfile {
  std::string name = "desk";
  int collect_episodes = 14;
  int collect_steps = 450;
  int heldout_episodes = 2;
  int heldout_steps = 300;
  int epochs = 40;
  int batch = 64;
  double lr = 1e-3;
  int n_neg = 256;
  double sigma_neg = 0.1;
  int eval_episodes = 10;
  int eval_steps = 3000;
  int n_samples = 2048;
  int n_iters = 5;
  double sigma_init = 0.5;
  double k_shrink = 0.5;
  int probe_m = 100;
  int probe_rollout = 80;
  int free_run = 2000;
  int grid = 101;
  int bev_h = 64;
  int bev_w = 64;
  double phi = 0.5;
  double kde_bandwidth = 0.2;
};

inline ReproProfile desk_profile() { return {}; }

inline ReproProfile smoke_profile() {
  ReproProfile p;
  p.name = "smoke";
  p.collect_episodes = 2;
  p.collect_steps = 150;
  p.heldout_episodes = 1;
  p.heldout_steps = 120;
  p.epochs = 2;
  p.batch = 32;
  p.n_neg = 32;
  p.eval_episodes = 2;
  p.eval_steps = 150;
  p.n_samples = 128;
  p.probe_m = 10;
  p.probe_rollout = 40;
  p.free_run = 300;
  p.grid = 21;
  p.bev_h = 32;
  p.bev_w = 32;
  return p;
}

inline ReproProfile profile_from_name(const std::string& name) {
  if (name == "desk") return desk_profile();
  if (name == "smoke") return smoke_profile();
  throw InputError("unknown repro profile '" + name + "' (expected desk or smoke)");
}

inline ordered_json profile_to_json(const ReproProfile& p) {
  ordered_json j;
  j["name"] = p.name;
  j["collect_episodes"] = p.collect_episodes;
  j["collect_steps"] = p.collect_steps;
  j["heldout_episodes"] = p.heldout_episodes;
  j["heldout_steps"] = p.heldout_steps;
  j["epochs"] = p.epochs;
  j["batch"] = p.batch;
  j["lr"] = p.lr;
  j["n_neg"] = p.n_neg;
  j["sigma_neg"] = p.sigma_neg;
  j["eval_episodes"] = p.eval_episodes;
  j["eval_steps"] = p.eval_steps;
  j["n_samples"] = p.n_samples;
  j["n_iters"] = p.n_iters;
  j["sigma_init"] = p.sigma_init;
  j["k_shrink"] = p.k_shrink;
  j["probe_m"] = p.probe_m;
  j["probe_rollout"] = p.probe_rollout;
  j["free_run"] = p.free_run;
  j["grid"] = p.grid;
  j["bev_h"] = p.bev_h;
  j["bev_w"] = p.bev_w;
  j["phi"] = p.phi;
  j["kde_bandwidth"] = p.kde_bandwidth;
  return j;
}

struct ReproResult {
  ordered_json report;
  std::filesystem::path out;
};

// Mean energies of expert vs uniform-random actions over held-out states.
inline ordered_json energy_separation(ebm::EnergyNet<float>& net, const sim::Dataset& heldout,
                                      uint64_t seed) {
  Rng rng(Rng::mix(seed, 0x5E9));
  double expert_sum = 0.0, uniform_sum = 0.0;
  const int64_t n = heldout.count;
  for (int64_t i = 0; i < n; ++i) {
    Tensor<float> bev = Tensor<float>::from(
        {1, sim::kBevChannels, heldout.bev.h, heldout.bev.w},
        std::vector<float>(heldout.bev_row(i).begin(), heldout.bev_row(i).end()));
    auto srow = heldout.state_row(i);
    Tensor<float> state = Tensor<float>::from({1, 3}, {srow[0], srow[1], srow[2]});
    auto ctx = net.encode(bev, state, false);
    std::vector<Action> acts = {heldout.actions[static_cast<size_t>(i)]};
    for (int k = 0; k < 4; ++k)
      acts.push_back({static_cast<float>(rng.uniform(-1, 1)), static_cast<float>(rng.uniform(-1, 1))});
    const auto e = net.energies(ctx, acts, static_cast<int>(acts.size()), false);
    expert_sum += e[0];
    uniform_sum += (e[1] + e[2] + e[3] + e[4]) / 4.0;
  }
  ordered_json j;
  j["states"] = n;
  j["expert_mean_energy"] = expert_sum / static_cast<double>(n);
  j["uniform_mean_energy"] = uniform_sum / static_cast<double>(n);
  j["gap"] = uniform_sum / static_cast<double>(n) - expert_sum / static_cast<double>(n);
  return j;
}

inline ReproResult run_repro(const std::filesystem::path& out, const ReproProfile& p,
                             uint64_t seed, uint64_t config_hash) {
  namespace fs = std::filesystem;
  fs::create_directories(out);
  const sim::BevSpec bev{p.bev_h, p.bev_w, p.phi};
  const sim::VehicleParams vp;
  const sim::ExpertParams ep;

  std::printf("[repro] profile=%s seed=%llu out=%s\n", p.name.c_str(),
              static_cast<unsigned long long>(seed), out.string().c_str());
  sim::TownMap town = sim::make_t_fixture_town();
  sim::save_town(out / "town.json", town);

  std::printf("[repro] collecting demonstrations (%d episodes x %d steps)\n", p.collect_episodes,
              p.collect_steps);
  sim::DatasetConfig dc;
  dc.episodes = p.collect_episodes;
  dc.steps_per_episode = p.collect_steps;
  dc.seed = seed;
  dc.bev = bev;
  dc.vehicle = vp;
  dc.expert = ep;
  sim::Dataset data = sim::collect_dataset(town, dc);
  sim::save_dataset(out / "data", data);

  sim::DatasetConfig hc = dc;
  hc.episodes = p.heldout_episodes;
  hc.steps_per_episode = p.heldout_steps;
  hc.seed = seed + 1000;
  sim::Dataset heldout = sim::collect_dataset(town, hc);
  sim::save_dataset(out / "heldout", heldout);

  fs::create_directories(out / "fixtures");
  const DecisionSnapshot decision = find_decision_snapshot(town, bev, vp, ep, seed + 7);
  save_snapshot(out / "fixtures" / "decision.state", decision);
  const DecisionSnapshot stopred = find_stop_at_red_snapshot(town, bev, vp, ep, seed + 8);
  save_snapshot(out / "fixtures" / "stopred.state", stopred);
  sim::Observation decision_obs, stopred_obs;
  {
    sim::World w(town, bev, vp);
    w.reset(decision.vehicle, decision.step);
    decision_obs = w.render();
    sim::save_observation(out / "fixtures" / "decision.obs", decision_obs);
    w.reset(stopred.vehicle, stopred.step);
    stopred_obs = w.render();
    sim::save_observation(out / "fixtures" / "stopred.obs", stopred_obs);
  }

  ordered_json report;
  report["format"] = "daibc-repro-v1";
  report["profile"] = profile_to_json(p);
  report["seed"] = seed;
  report["config_hash"] = hex64(config_hash);
  report["town_hash"] = hex64(sim::town_structural_hash(town));
  report["samples"] = data.count;

  // train all three methods
  std::map<Method, TrainResult> results;
  std::map<Method, LoadedPolicy> policies;
  ordered_json trainings;
  for (Method m : {Method::Bc, Method::Ibc, Method::DaIbc}) {
    TrainConfig tc;
    tc.method = m;
    tc.epochs = p.epochs;
    tc.batch = p.batch;
    tc.lr = p.lr;
    tc.seed = seed + 17;
    tc.kde_bandwidth = p.kde_bandwidth;
    tc.ebm.n_neg = p.n_neg;
    tc.ebm.sigma_neg = p.sigma_neg;
    tc.config_hash = config_hash;
    if (m == Method::Bc) tc.grad_clip = 10.0;  // Beta NLL boundary terms spike early
    std::printf("[repro] training %s (%d epochs)\n", method_name(m).c_str(), p.epochs);
    results[m] = train(data, tc, out / "runs" / method_name(m));
    policies[m] = load_policy(results[m].checkpoint);
    ordered_json tj;
    tj["iterations"] = results[m].iterations;
    tj["first_loss"] = results[m].first_loss;
    tj["final_loss"] = results[m].final_loss;
    trainings[method_name(m)] = tj;
  }
  report["trainings"] = trainings;

  auto dfo_for = [&](Method m) {
    dfo::DfoConfig d;
    d.n_samples = p.n_samples;
    d.n_iters = p.n_iters;
    d.sigma_init = p.sigma_init;
    d.k_shrink = p.k_shrink;
    if (m == Method::Ibc) {
      d.init = dfo::InitKind::Uniform;
      d.ret = dfo::ReturnMode::Argmax;
    } else {
      d.init = dfo::InitKind::ExpertKde;
      d.ret = dfo::ReturnMode::Categorical;
    }
    return d;
  };

  // evaluate all three
  fs::create_directories(out / "eval");
  ordered_json evals;
  EvalConfig ec;
  ec.episodes = p.eval_episodes;
  ec.steps = p.eval_steps;
  ec.seed = seed + 23;
  for (Method m : {Method::Bc, Method::Ibc, Method::DaIbc}) {
    std::unique_ptr<Agent> agent;
    if (m == Method::Bc) {
      agent = std::make_unique<BetaAgent>(policies[m].beta_net.get(), beta::ActMode::Mean);
    } else {
      agent = std::make_unique<EbmAgent>(policies[m].ebm_net.get(),
                                         make_agent_context(data, p.kde_bandwidth, dfo_for(m)));
    }
    std::printf("[repro] evaluating %s (%d x %d steps)\n", method_name(m).c_str(), ec.episodes,
                ec.steps);
    EvalReport er = evaluate(*agent, town, ec, bev, vp);
    ordered_json ejson = er.to_json();
    ejson["config_hash"] = hex64(config_hash);
    write_text_file(out / "eval" / (method_name(m) + ".json"), ejson.dump(2) + "\n");
    ordered_json ej;
    ej["mean_distance"] = er.mean_distance;
    ej["std_distance"] = er.std_distance;
    ej["mean_score"] = er.mean_score;
    ej["std_score"] = er.std_score;
    evals[method_name(m)] = ej;
  }
  report["evals"] = evals;

  // multimodality probe on DA-IBC plus the BC mean action at the decision state
  std::printf("[repro] probing multimodality (M=%d)\n", p.probe_m);
  ProbeConfig pc;
  pc.m = p.probe_m;
  pc.rollout_steps = p.probe_rollout;
  pc.free_run_steps = p.free_run;
  pc.seed = seed + 31;
  EbmAgent da_agent(policies[Method::DaIbc].ebm_net.get(),
                    make_agent_context(data, p.kde_bandwidth, dfo_for(Method::DaIbc)));
  ProbeReport probe = multimodality_probe(da_agent, town, decision, pc, bev, vp);
  write_text_file(out / "probe.json", probe.to_json().dump(2) + "\n");
  report["probe_da_ibc"] = probe.to_json();

  {
    Rng arng(1);
    Tensor<float> b = bev_tensor(decision_obs);
    Tensor<float> s = state_tensor(decision_obs);
    const Action bc_mean =
        policies[Method::Bc].beta_net->act(b, s, beta::ActMode::Mean, arng);
    ordered_json bj;
    bj["steering"] = bc_mean.steering;
    bj["accel"] = bc_mean.accel;
    report["bc_decision_mean_action"] = bj;
  }

  // energy landscapes for the DA-IBC model
  std::printf("[repro] exporting energy landscapes (%dx%d)\n", p.grid, p.grid);
  fs::create_directories(out / "landscape");
  LandscapeConfig lc;
  lc.grid = p.grid;
  lc.seed = seed + 37;
  auto da_ctx = make_agent_context(data, p.kde_bandwidth, dfo_for(Method::DaIbc));
  const auto decision_ls = export_landscape(
      *policies[Method::DaIbc].ebm_net, decision_obs, da_ctx, lc,
      out / "landscape" / "decision.csv", out / "landscape" / "decision_overlays.csv");
  const auto stopred_ls = export_landscape(
      *policies[Method::DaIbc].ebm_net, stopred_obs, da_ctx, lc,
      out / "landscape" / "stopred.csv", out / "landscape" / "stopred_overlays.csv");
  ordered_json lj;
  lj["decision_argmin"] = {decision_ls.grid_argmin.steering, decision_ls.grid_argmin.accel};
  lj["stopred_argmin"] = {stopred_ls.grid_argmin.steering, stopred_ls.grid_argmin.accel};
  lj["stopred_argmin_norm"] =
      std::max(std::abs(stopred_ls.grid_argmin.steering), std::abs(stopred_ls.grid_argmin.accel));
  report["landscape"] = lj;

  report["energy_separation"] =
      energy_separation(*policies[Method::DaIbc].ebm_net, heldout, seed + 41);

  const double da_dist = evals["da-ibc"]["mean_distance"].get<double>();
  const double ibc_dist = evals["ibc"]["mean_distance"].get<double>();
  ordered_json ord;
  ord["da_ibc_mean_distance"] = da_dist;
  ord["ibc_mean_distance"] = ibc_dist;
  ord["da_ibc_at_least_ibc"] = da_dist >= ibc_dist;
  report["distance_ordering"] = ord;

  write_text_file(out / "report.json", report.dump(2) + "\n");
  std::printf("[repro] report written to %s\n", (out / "report.json").string().c_str());
  return {report, out};
}

}  // namespace daibc::harness
