// daibc command-line front end: town generation, demonstration collection,
// training, evaluation, multimodality probing, landscape export, and the
// one-shot repro pipeline.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <optional>

#include "daibc/harness/repro.hpp"
#include "daibc/runconfig.hpp"

namespace fs = std::filesystem;
using namespace daibc;
using cli::RunConfig;

namespace {

// CLI option values land here; only explicitly-passed options override the
// config file, which overrides the declared defaults.
struct Pending {
  std::vector<std::pair<std::string, ordered_json>> sets;
  std::optional<std::string> config_file;

  void apply(RunConfig& cfg) const {
    if (config_file) cfg.load_file(*config_file);
    for (const auto& [k, v] : sets) cfg.set(k, v);
  }
};

void add_opt_str(CLI::App* app, Pending& p, const std::string& flag, const std::string& key,
                 const std::string& desc) {
  app->add_option_function<std::string>(
      flag, [&p, key](const std::string& v) { p.sets.emplace_back(key, v); }, desc);
}

CLI::Option* add_opt_int(CLI::App* app, Pending& p, const std::string& flag,
                         const std::string& key, const std::string& desc) {
  return app->add_option_function<int64_t>(
      flag, [&p, key](int64_t v) { p.sets.emplace_back(key, v); }, desc);
}

void add_opt_f64(CLI::App* app, Pending& p, const std::string& flag, const std::string& key,
                 const std::string& desc) {
  app->add_option_function<double>(
      flag, [&p, key](double v) { p.sets.emplace_back(key, v); }, desc);
}

void add_opt_bool(CLI::App* app, Pending& p, const std::string& flag, const std::string& key,
                  const std::string& desc) {
  app->add_option_function<bool>(
      flag, [&p, key](bool v) { p.sets.emplace_back(key, v); }, desc);
}

void add_config_opt(CLI::App* app, Pending& p) {
  app->add_option_function<std::string>(
      "--config", [&p](const std::string& v) { p.config_file = v; },
      "flat JSON config file; explicit CLI flags win");
}

dfo::DfoConfig dfo_from_config(const RunConfig& cfg, const std::string& method_hint) {
  dfo::DfoConfig d;
  d.n_samples = cfg.get_int("n_samples");
  d.n_iters = cfg.get_int("n_iters");
  d.sigma_init = cfg.get_double("sigma_init");
  d.k_shrink = cfg.get_double("k_shrink");
  std::string init = cfg.get_str("dfo_init");
  std::string ret = cfg.get_str("dfo_return");
  if (init == "auto") init = method_hint == "ibc" ? "uniform" : "expert-kde";
  if (ret == "auto") ret = method_hint == "ibc" ? "argmax" : "categorical";
  if (init == "uniform") d.init = dfo::InitKind::Uniform;
  else if (init == "expert-kde") d.init = dfo::InitKind::ExpertKde;
  else throw InputError("dfo_init must be auto, uniform, or expert-kde");
  if (ret == "argmax") d.ret = dfo::ReturnMode::Argmax;
  else if (ret == "categorical") d.ret = dfo::ReturnMode::Categorical;
  else throw InputError("dfo_return must be auto, categorical, or argmax");
  d.validate();
  return d;
}

harness::InitWeightMode weight_mode_from_config(const RunConfig& cfg) {
  const std::string m = cfg.get_str("init_weight_mode");
  if (m == "inverse-density") return harness::InitWeightMode::InverseDensity;
  if (m == "density") return harness::InitWeightMode::Density;
  throw InputError("init_weight_mode must be inverse-density or density");
}

void declare_dfo_keys(RunConfig& cfg) {
  cfg.declare("n_samples", 2048);  // paper-scale 16384 via config
  cfg.declare("n_iters", 5);
  cfg.declare("sigma_init", 0.5);
  cfg.declare("k_shrink", 0.5);
  cfg.declare("dfo_init", "auto");
  cfg.declare("dfo_return", "auto");
  cfg.declare("init_weight_mode", "inverse-density");
  cfg.declare("kde_bandwidth", 0.2);
}

int cmd_gen_town(const Pending& p) {
  RunConfig cfg;
  cfg.declare("seed", 1);
  cfg.declare("blocks", 4);
  cfg.declare("preset", "grid");
  cfg.declare("out", "town.json", true);
  p.apply(cfg);
  const std::string preset = cfg.get_str("preset");
  sim::TownMap town;
  if (preset == "grid") town = sim::gen_town(cfg.get_u64("seed"), cfg.get_int("blocks"));
  else if (preset == "t-fixture") town = sim::make_t_fixture_town();
  else throw InputError("preset must be grid or t-fixture");
  const fs::path out = cfg.get_str("out");
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  sim::save_town(out, town);
  cfg.write_resolved(out.string() + ".config.json");
  std::printf("town: %zu nodes, %zu lanes, %zu lights, hash %s -> %s\n", town.nodes.size(),
              town.edges.size(), town.lights.size(),
              hex64(sim::town_structural_hash(town)).c_str(), out.string().c_str());
  return kExitOk;
}

int cmd_collect(const Pending& p) {
  RunConfig cfg;
  cfg.declare("town", "", true);
  cfg.declare("out", "data", true);
  cfg.declare("seed", 1);
  cfg.declare("episodes", 8);
  cfg.declare("steps", 500);
  cfg.declare("bev_h", 64);
  cfg.declare("bev_w", 64);
  cfg.declare("phi", 0.5);
  p.apply(cfg);
  require(!cfg.get_str("town").empty(), "collect: --town is required");
  sim::TownMap town = sim::load_town(cfg.get_str("town"));
  sim::DatasetConfig dc;
  dc.episodes = cfg.get_int("episodes");
  dc.steps_per_episode = cfg.get_int("steps");
  dc.seed = cfg.get_u64("seed");
  dc.bev = {cfg.get_int("bev_h"), cfg.get_int("bev_w"), cfg.get_double("phi")};
  sim::Dataset ds = sim::collect_dataset(town, dc);
  const fs::path out = cfg.get_str("out");
  sim::save_dataset(out, ds);
  cfg.write_resolved(out / "collect.config.json");
  std::printf("dataset: %lld samples (%d x %d), %lld-float obs rows -> %s\n",
              static_cast<long long>(ds.count), dc.episodes, dc.steps_per_episode,
              static_cast<long long>(ds.obs_stride()), out.string().c_str());
  return kExitOk;
}

int cmd_train(const Pending& p) {
  RunConfig cfg;
  cfg.declare("data", "", true);
  cfg.declare("out", "run", true);
  cfg.declare("method", "da-ibc");
  cfg.declare("seed", 1);
  cfg.declare("epochs", 50);
  cfg.declare("batch", 128);   // paper N = 128
  cfg.declare("lr", 1e-5);     // paper ADAM step size
  cfg.declare("kde_bandwidth", 0.2);
  cfg.declare("n_neg", 256);   // paper-scale 1024 via config
  cfg.declare("sigma_neg", 0.1);
  cfg.declare("weighted_sampling", true);
  cfg.declare("weighted_loss", false);
  cfg.declare("grad_clip", 0.0);
  cfg.declare("embed_dim", 256);
  cfg.declare("keep_epoch_checkpoints", false);
  p.apply(cfg);
  require(!cfg.get_str("data").empty(), "train: --data is required");
  sim::Dataset ds = sim::load_dataset(cfg.get_str("data"));
  harness::TrainConfig tc;
  tc.method = harness::method_from_name(cfg.get_str("method"));
  tc.epochs = cfg.get_int("epochs");
  tc.batch = cfg.get_int("batch");
  tc.lr = cfg.get_double("lr");
  tc.seed = cfg.get_u64("seed");
  tc.kde_bandwidth = cfg.get_double("kde_bandwidth");
  tc.ebm.n_neg = cfg.get_int("n_neg");
  tc.ebm.sigma_neg = cfg.get_double("sigma_neg");
  tc.weighted_sampling = cfg.get_bool("weighted_sampling");
  tc.weighted_loss = cfg.get_bool("weighted_loss");
  tc.grad_clip = cfg.get_double("grad_clip");
  tc.config_hash = cfg.semantic_hash();
  tc.net.embed_dim = cfg.get_int("embed_dim");
  tc.keep_epoch_checkpoints = cfg.get_bool("keep_epoch_checkpoints");
  const fs::path out = cfg.get_str("out");
  fs::create_directories(out);
  cfg.write_resolved(out / "train.config.json");
  const auto res = harness::train(ds, tc, out);
  std::printf("trained %s: %d iterations, loss %.6g -> %.6g, checkpoint %s\n",
              cfg.get_str("method").c_str(), res.iterations, res.first_loss, res.final_loss,
              res.checkpoint.string().c_str());
  return kExitOk;
}

// Shared EBM-agent assembly for eval/probe/landscape.
struct EbmParts {
  harness::LoadedPolicy policy;
  harness::AgentContext ctx;
};

EbmParts make_ebm_parts(const RunConfig& cfg) {
  EbmParts parts;
  parts.policy = harness::load_policy(cfg.get_str("ckpt"));
  require(parts.policy.kind == "ebm", "this command needs an EBM checkpoint");
  require(!cfg.get_str("data").empty(), "--data (training dataset) is required for EBM inference");
  sim::Dataset data = sim::load_dataset(cfg.get_str("data"));
  const std::string hint = parts.policy.info.meta.value("method", "da-ibc");
  parts.ctx = harness::make_agent_context(data, cfg.get_double("kde_bandwidth"),
                                          dfo_from_config(cfg, hint), weight_mode_from_config(cfg));
  return parts;
}

int cmd_eval(const Pending& p) {
  RunConfig cfg;
  cfg.declare("ckpt", "", true);
  cfg.declare("town", "", true);
  cfg.declare("data", "", true);
  cfg.declare("out", "eval.json", true);
  cfg.declare("seed", 1);
  cfg.declare("episodes", 10);  // paper: ten times
  cfg.declare("steps", 3000);   // paper: 3,000 steps
  cfg.declare("phi", 0.5);
  cfg.declare("bc_act", "mean");
  declare_dfo_keys(cfg);
  p.apply(cfg);
  require(!cfg.get_str("ckpt").empty() && !cfg.get_str("town").empty(),
          "eval: --ckpt and --town are required");
  sim::TownMap town = sim::load_town(cfg.get_str("town"));
  harness::EvalConfig ec;
  ec.episodes = cfg.get_int("episodes");
  ec.steps = cfg.get_int("steps");
  ec.seed = cfg.get_u64("seed");

  harness::LoadedPolicy policy = harness::load_policy(cfg.get_str("ckpt"));
  const sim::BevSpec bev{policy.info.spec.bev_h, policy.info.spec.bev_w, cfg.get_double("phi")};
  std::unique_ptr<harness::Agent> agent;
  harness::LoadedPolicy ebm_policy;
  if (policy.kind == "beta") {
    const std::string mode = cfg.get_str("bc_act");
    require(mode == "mean" || mode == "sample", "bc_act must be mean or sample");
    agent = std::make_unique<harness::BetaAgent>(
        policy.beta_net.get(), mode == "mean" ? beta::ActMode::Mean : beta::ActMode::Sample);
  } else {
    EbmParts parts = make_ebm_parts(cfg);
    ebm_policy = std::move(parts.policy);
    agent = std::make_unique<harness::EbmAgent>(ebm_policy.ebm_net.get(), std::move(parts.ctx));
  }
  harness::EvalReport report = evaluate(*agent, town, ec, bev);
  ordered_json j = report.to_json();
  j["config_hash"] = hex64(cfg.semantic_hash());
  const fs::path out = cfg.get_str("out");
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_text_file(out, j.dump(2) + "\n");
  cfg.write_resolved(out.string() + ".config.json");
  std::printf("eval %s: mean distance %.1f m, mean score %.1f over %d episodes -> %s\n",
              report.agent.c_str(), report.mean_distance, report.mean_score, ec.episodes,
              out.string().c_str());
  return kExitOk;
}

int cmd_snapshot(const Pending& p) {
  RunConfig cfg;
  cfg.declare("town", "", true);
  cfg.declare("out", "fixtures", true);
  cfg.declare("kind", "decision");
  cfg.declare("seed", 1);
  cfg.declare("bev_h", 64);
  cfg.declare("bev_w", 64);
  cfg.declare("phi", 0.5);
  p.apply(cfg);
  require(!cfg.get_str("town").empty(), "snapshot: --town is required");
  sim::TownMap town = sim::load_town(cfg.get_str("town"));
  const sim::BevSpec bev{cfg.get_int("bev_h"), cfg.get_int("bev_w"), cfg.get_double("phi")};
  const sim::VehicleParams vp;
  const sim::ExpertParams ep;
  const std::string kind = cfg.get_str("kind");
  harness::DecisionSnapshot snap;
  if (kind == "decision")
    snap = harness::find_decision_snapshot(town, bev, vp, ep, cfg.get_u64("seed"));
  else if (kind == "stop-red")
    snap = harness::find_stop_at_red_snapshot(town, bev, vp, ep, cfg.get_u64("seed"));
  else
    throw InputError("kind must be decision or stop-red");
  const fs::path out = cfg.get_str("out");
  fs::create_directories(out);
  harness::save_snapshot(out / (kind + ".state"), snap);
  sim::World w(town, bev, vp);
  w.reset(snap.vehicle, snap.step);
  sim::save_observation(out / (kind + ".obs"), w.render());
  cfg.write_resolved(out / (kind + ".config.json"));
  std::printf("snapshot %s at step %lld, edge %d -> %s/{%s.state,%s.obs}\n", kind.c_str(),
              static_cast<long long>(snap.step), snap.approach_edge, out.string().c_str(),
              kind.c_str(), kind.c_str());
  return kExitOk;
}

int cmd_probe(const Pending& p) {
  RunConfig cfg;
  cfg.declare("ckpt", "", true);
  cfg.declare("town", "", true);
  cfg.declare("state", "", true);
  cfg.declare("data", "", true);
  cfg.declare("out", "probe.json", true);
  cfg.declare("seed", 1);
  cfg.declare("m", 100);
  cfg.declare("rollout_steps", 80);
  cfg.declare("free_run_steps", 2000);
  cfg.declare("phi", 0.5);
  declare_dfo_keys(cfg);
  p.apply(cfg);
  require(!cfg.get_str("ckpt").empty() && !cfg.get_str("town").empty() &&
              !cfg.get_str("state").empty(),
          "probe: --ckpt, --town and --state are required");
  sim::TownMap town = sim::load_town(cfg.get_str("town"));
  harness::DecisionSnapshot snap = harness::load_snapshot(cfg.get_str("state"));
  EbmParts parts = make_ebm_parts(cfg);
  harness::EbmAgent agent(parts.policy.ebm_net.get(), std::move(parts.ctx));
  const sim::BevSpec bev{parts.policy.info.spec.bev_h, parts.policy.info.spec.bev_w,
                         cfg.get_double("phi")};
  harness::ProbeConfig pc;
  pc.m = cfg.get_int("m");
  pc.rollout_steps = cfg.get_int("rollout_steps");
  pc.free_run_steps = cfg.get_int("free_run_steps");
  pc.seed = cfg.get_u64("seed");
  harness::ProbeReport report = harness::multimodality_probe(agent, town, snap, pc, bev);
  ordered_json j = report.to_json();
  j["config_hash"] = hex64(cfg.semantic_hash());
  const fs::path out = cfg.get_str("out");
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_text_file(out, j.dump(2) + "\n");
  cfg.write_resolved(out.string() + ".config.json");
  std::printf("probe: branches");
  for (size_t i = 0; i < report.branch_fractions.size(); ++i)
    std::printf(" %d:%.2f", report.branch_edges[i], report.branch_fractions[i]);
  std::printf(" unresolved:%d steer L/R/0 %d/%d/%d -> %s\n", report.unresolved, report.steer_left,
              report.steer_right, report.steer_zero, out.string().c_str());
  return kExitOk;
}

int cmd_landscape(const Pending& p) {
  RunConfig cfg;
  cfg.declare("ckpt", "", true);
  cfg.declare("state", "", true);  // .obs observation file
  cfg.declare("data", "", true);
  cfg.declare("out", "landscape.csv", true);
  cfg.declare("seed", 1);
  cfg.declare("grid", 101);
  cfg.declare("inferences", 10);  // paper: ten white points
  cfg.declare("dfo_trace", "", true);
  declare_dfo_keys(cfg);
  p.apply(cfg);
  require(!cfg.get_str("ckpt").empty() && !cfg.get_str("state").empty(),
          "landscape: --ckpt and --state are required");
  sim::Observation obs = sim::load_observation(cfg.get_str("state"));
  EbmParts parts = make_ebm_parts(cfg);
  harness::LandscapeConfig lc;
  lc.grid = cfg.get_int("grid");
  lc.inferences = cfg.get_int("inferences");
  lc.seed = cfg.get_u64("seed");
  const fs::path out = cfg.get_str("out");
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  fs::path overlays = out;
  overlays.replace_extension("");
  overlays += "_overlays.csv";
  const auto res = harness::export_landscape(*parts.policy.ebm_net, obs, parts.ctx, lc, out,
                                             overlays);
  if (!cfg.get_str("dfo_trace").empty()) {
    // per-iteration pool snapshot of one traced inference
    Tensor<float> b = harness::bev_tensor(obs);
    Tensor<float> s = harness::state_tensor(obs);
    auto octx = parts.policy.ebm_net->encode(b, s, false);
    dfo::EnergyFn fn = [&](std::span<const Action> acts) {
      return parts.policy.ebm_net->energies(octx, acts, static_cast<int>(acts.size()), false);
    };
    std::vector<dfo::DfoTraceRow> trace;
    Rng trng(Rng::mix(cfg.get_u64("seed"), 0x7ACE));
    dfo::dfo_infer(fn, parts.ctx.dfo, parts.ctx.expert_actions,
                   parts.ctx.init_weights.probs.empty() ? nullptr : &parts.ctx.init_weights, trng,
                   &trace);
    dfo::write_dfo_trace_csv(cfg.get_str("dfo_trace"), trace);
  }
  cfg.write_resolved(out.string() + ".config.json");
  std::printf("landscape: %dx%d grid, argmin (%.3f, %.3f) at E=%.6g -> %s + %s\n", lc.grid,
              lc.grid, res.grid_argmin.steering, res.grid_argmin.accel, res.min_energy,
              out.string().c_str(), overlays.string().c_str());
  return kExitOk;
}

int cmd_repro(const Pending& p) {
  RunConfig cfg;
  cfg.declare("out", "repro", true);
  cfg.declare("seed", 1);
  cfg.declare("profile", "desk");
  p.apply(cfg);
  const auto profile = harness::profile_from_name(cfg.get_str("profile"));
  const fs::path out = cfg.get_str("out");
  fs::create_directories(out);
  cfg.write_resolved(out / "repro.config.json");
  const auto res = harness::run_repro(out, profile, cfg.get_u64("seed"), cfg.semantic_hash());
  const auto& probe = res.report.at("probe_da_ibc");
  std::printf("repro done: da-ibc branch fractions");
  for (const auto& f : probe.at("branch_fractions")) std::printf(" %.2f", f.get<double>());
  std::printf(", bc mean steering %.3f\n",
              res.report.at("bc_decision_mean_action").at("steering").get<double>());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"energy-based and explicit behavioral cloning in a 2D driving micro-world"};
  app.require_subcommand(1);

  Pending pend[8];
  auto* gen = app.add_subcommand("gen-town", "generate a road-network town file");
  add_config_opt(gen, pend[0]);
  add_opt_int(gen, pend[0], "--seed", "seed", "town seed");
  add_opt_int(gen, pend[0], "--blocks", "blocks", "city blocks per side (>= 2)")
      ->check(CLI::Range(static_cast<int64_t>(2), static_cast<int64_t>(64)));
  add_opt_str(gen, pend[0], "--preset", "preset", "grid | t-fixture");
  add_opt_str(gen, pend[0], "--out", "out", "output town JSON path");

  auto* col = app.add_subcommand("collect", "record expert demonstrations");
  add_config_opt(col, pend[1]);
  add_opt_str(col, pend[1], "--town", "town", "town JSON file");
  add_opt_str(col, pend[1], "--out", "out", "output dataset directory");
  add_opt_int(col, pend[1], "--seed", "seed", "collection seed");
  add_opt_int(col, pend[1], "--episodes", "episodes", "episode count");
  add_opt_int(col, pend[1], "--steps", "steps", "steps per episode");
  add_opt_int(col, pend[1], "--bev-h", "bev_h", "BEV grid height");
  add_opt_int(col, pend[1], "--bev-w", "bev_w", "BEV grid width");
  add_opt_f64(col, pend[1], "--phi", "phi", "meters per pixel");

  auto* tr = app.add_subcommand("train", "train bc, ibc, or da-ibc on a dataset");
  add_config_opt(tr, pend[2]);
  add_opt_str(tr, pend[2], "--data", "data", "dataset directory");
  add_opt_str(tr, pend[2], "--out", "out", "run output directory");
  add_opt_str(tr, pend[2], "--method", "method", "bc | ibc | da-ibc");
  add_opt_int(tr, pend[2], "--seed", "seed", "training seed");
  add_opt_int(tr, pend[2], "--epochs", "epochs", "epoch count");
  add_opt_int(tr, pend[2], "--batch", "batch", "minibatch size");
  add_opt_f64(tr, pend[2], "--lr", "lr", "ADAM step size");
  add_opt_f64(tr, pend[2], "--kde-bandwidth", "kde_bandwidth", "KDE bandwidth h");
  add_opt_int(tr, pend[2], "--n-neg", "n_neg", "counterexamples per sample");
  add_opt_f64(tr, pend[2], "--sigma-neg", "sigma_neg", "DA-IBC perturbation scale");
  add_opt_bool(tr, pend[2], "--weighted-sampling", "weighted_sampling",
               "draw minibatches by inverse-density weights");
  add_opt_bool(tr, pend[2], "--weighted-loss", "weighted_loss", "weight loss terms directly");
  add_opt_f64(tr, pend[2], "--grad-clip", "grad_clip", "global gradient-norm clip (0 = off)");
  add_opt_int(tr, pend[2], "--embed-dim", "embed_dim", "per-branch embedding width");
  add_opt_bool(tr, pend[2], "--keep-epoch-checkpoints", "keep_epoch_checkpoints",
               "retain a checkpoint per epoch");

  auto* ev = app.add_subcommand("eval", "roll out a trained policy and score it");
  add_config_opt(ev, pend[3]);
  add_opt_str(ev, pend[3], "--ckpt", "ckpt", "checkpoint file");
  add_opt_str(ev, pend[3], "--town", "town", "town JSON file");
  add_opt_str(ev, pend[3], "--data", "data", "training dataset (EBM inference init)");
  add_opt_str(ev, pend[3], "--out", "out", "report JSON path");
  add_opt_int(ev, pend[3], "--seed", "seed", "evaluation seed");
  add_opt_int(ev, pend[3], "--episodes", "episodes", "episode count");
  add_opt_int(ev, pend[3], "--steps", "steps", "steps per episode");
  add_opt_str(ev, pend[3], "--bc-act", "bc_act", "mean | sample");
  add_opt_int(ev, pend[3], "--n-samples", "n_samples", "DFO pool size");
  add_opt_int(ev, pend[3], "--n-iters", "n_iters", "DFO iterations");
  add_opt_f64(ev, pend[3], "--sigma-init", "sigma_init", "DFO initial scale");
  add_opt_f64(ev, pend[3], "--k-shrink", "k_shrink", "DFO shrink factor");
  add_opt_str(ev, pend[3], "--dfo-init", "dfo_init", "auto | uniform | expert-kde");
  add_opt_str(ev, pend[3], "--dfo-return", "dfo_return", "auto | categorical | argmax");
  add_opt_str(ev, pend[3], "--init-weight-mode", "init_weight_mode",
              "inverse-density | density");
  add_opt_f64(ev, pend[3], "--kde-bandwidth", "kde_bandwidth", "KDE bandwidth h");

  auto* sn = app.add_subcommand("snapshot", "extract canonical fixture states from a town");
  add_config_opt(sn, pend[4]);
  add_opt_str(sn, pend[4], "--town", "town", "town JSON file");
  add_opt_str(sn, pend[4], "--out", "out", "fixture output directory");
  add_opt_str(sn, pend[4], "--kind", "kind", "decision | stop-red");
  add_opt_int(sn, pend[4], "--seed", "seed", "expert seed");
  add_opt_int(sn, pend[4], "--bev-h", "bev_h", "BEV grid height");
  add_opt_int(sn, pend[4], "--bev-w", "bev_w", "BEV grid width");
  add_opt_f64(sn, pend[4], "--phi", "phi", "meters per pixel");

  auto* pr = app.add_subcommand("probe", "measure multimodal branching at a decision state");
  add_config_opt(pr, pend[5]);
  add_opt_str(pr, pend[5], "--ckpt", "ckpt", "EBM checkpoint file");
  add_opt_str(pr, pend[5], "--town", "town", "town JSON file");
  add_opt_str(pr, pend[5], "--state", "state", "decision .state file");
  add_opt_str(pr, pend[5], "--data", "data", "training dataset (EBM inference init)");
  add_opt_str(pr, pend[5], "--out", "out", "probe report JSON path");
  add_opt_int(pr, pend[5], "--seed", "seed", "probe seed");
  add_opt_int(pr, pend[5], "--m", "m", "inferences per decision state");
  add_opt_int(pr, pend[5], "--rollout-steps", "rollout_steps", "branch rollout horizon");
  add_opt_int(pr, pend[5], "--free-run-steps", "free_run_steps", "coverage rollout length");
  add_opt_int(pr, pend[5], "--n-samples", "n_samples", "DFO pool size");
  add_opt_int(pr, pend[5], "--n-iters", "n_iters", "DFO iterations");
  add_opt_f64(pr, pend[5], "--sigma-init", "sigma_init", "DFO initial scale");
  add_opt_f64(pr, pend[5], "--k-shrink", "k_shrink", "DFO shrink factor");
  add_opt_str(pr, pend[5], "--dfo-init", "dfo_init", "auto | uniform | expert-kde");
  add_opt_str(pr, pend[5], "--dfo-return", "dfo_return", "auto | categorical | argmax");
  add_opt_str(pr, pend[5], "--init-weight-mode", "init_weight_mode",
              "inverse-density | density");
  add_opt_f64(pr, pend[5], "--kde-bandwidth", "kde_bandwidth", "KDE bandwidth h");

  auto* ls = app.add_subcommand("landscape", "export the energy surface over the action box");
  add_config_opt(ls, pend[6]);
  add_opt_str(ls, pend[6], "--ckpt", "ckpt", "EBM checkpoint file");
  add_opt_str(ls, pend[6], "--state", "state", "observation .obs file");
  add_opt_str(ls, pend[6], "--data", "data", "training dataset (EBM inference init)");
  add_opt_str(ls, pend[6], "--out", "out", "grid CSV path");
  add_opt_int(ls, pend[6], "--seed", "seed", "overlay inference seed");
  add_opt_int(ls, pend[6], "--grid", "grid", "grid cells per axis");
  add_opt_int(ls, pend[6], "--inferences", "inferences", "DFO overlay count");
  add_opt_str(ls, pend[6], "--dfo-trace", "dfo_trace",
              "also dump one inference's per-iteration pool to this CSV");
  add_opt_int(ls, pend[6], "--n-samples", "n_samples", "DFO pool size");
  add_opt_int(ls, pend[6], "--n-iters", "n_iters", "DFO iterations");
  add_opt_f64(ls, pend[6], "--sigma-init", "sigma_init", "DFO initial scale");
  add_opt_f64(ls, pend[6], "--k-shrink", "k_shrink", "DFO shrink factor");
  add_opt_str(ls, pend[6], "--dfo-init", "dfo_init", "auto | uniform | expert-kde");
  add_opt_str(ls, pend[6], "--dfo-return", "dfo_return", "auto | categorical | argmax");
  add_opt_str(ls, pend[6], "--init-weight-mode", "init_weight_mode",
              "inverse-density | density");
  add_opt_f64(ls, pend[6], "--kde-bandwidth", "kde_bandwidth", "KDE bandwidth h");

  auto* rp = app.add_subcommand("repro", "full fixture pipeline: collect, train all, probe, report");
  add_config_opt(rp, pend[7]);
  add_opt_str(rp, pend[7], "--out", "out", "pipeline output directory");
  add_opt_int(rp, pend[7], "--seed", "seed", "pipeline seed");
  add_opt_str(rp, pend[7], "--profile", "profile", "desk | smoke");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (gen->parsed()) return cmd_gen_town(pend[0]);
    if (col->parsed()) return cmd_collect(pend[1]);
    if (tr->parsed()) return cmd_train(pend[2]);
    if (ev->parsed()) return cmd_eval(pend[3]);
    if (sn->parsed()) return cmd_snapshot(pend[4]);
    if (pr->parsed()) return cmd_probe(pend[5]);
    if (ls->parsed()) return cmd_landscape(pend[6]);
    if (rp->parsed()) return cmd_repro(pend[7]);
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric failure: %s\n", e.what());
    return kExitNumeric;
  } catch (const InputError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitInput;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitInput;
  }
  return kExitUsage;
}
