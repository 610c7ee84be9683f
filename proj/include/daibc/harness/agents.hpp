#pragma once

#include <memory>
#include <string>
#include <vector>

#include "daibc/beta_policy.hpp"
#include "daibc/checkpoint.hpp"
#include "daibc/dfo.hpp"
#include "daibc/energy.hpp"
#include "daibc/kde.hpp"
#include "daibc/sim/bev.hpp"
#include "daibc/sim/dataset.hpp"

namespace daibc::harness {

inline Tensor<float> bev_tensor(const sim::Observation& obs) {
  return Tensor<float>::from({1, obs.bev.dim(0), obs.bev.dim(1), obs.bev.dim(2)},
                             std::vector<float>(obs.bev.data(), obs.bev.data() + obs.bev.numel()));
}

inline Tensor<float> state_tensor(const sim::Observation& obs) {
  return Tensor<float>::from({1, 3}, {obs.state[0], obs.state[1], obs.state[2]});
}

// Everything a trained EBM needs at inference time: the expert action set and
// the categorical-init weights from the training dataset, plus the DFO config.
struct AgentContext {
  std::vector<Action> expert_actions;
  density::SampleWeights init_weights;
  dfo::DfoConfig dfo;
};

enum class InitWeightMode { InverseDensity, Density };

inline AgentContext make_agent_context(const sim::Dataset& ds, double kde_bandwidth,
                                       const dfo::DfoConfig& cfg,
                                       InitWeightMode mode = InitWeightMode::InverseDensity,
                                       const density::WeightClamp& clamp = {}) {
  AgentContext ctx;
  ctx.expert_actions = ds.actions;
  auto model = density::kde_fit(ctx.expert_actions, kde_bandwidth);
  ctx.init_weights = mode == InitWeightMode::InverseDensity
                         ? density::inverse_density_weights(model, ctx.expert_actions, clamp)
                         : density::density_weights(model, ctx.expert_actions);
  ctx.dfo = cfg;
  return ctx;
}

// Policy under evaluation: maps an observation to an action.
class Agent {
 public:
  virtual ~Agent() = default;
  virtual Action act(const sim::Observation& obs, Rng& rng) = 0;
  virtual std::string describe() const = 0;
  virtual ordered_json stats() const { return ordered_json::object(); }
};

class BetaAgent final : public Agent {
 public:
  BetaAgent(beta::BetaPolicyNet<float>* net, beta::ActMode mode) : net_(net), mode_(mode) {}

  Action act(const sim::Observation& obs, Rng& rng) override {
    Tensor<float> bev = bev_tensor(obs);
    Tensor<float> state = state_tensor(obs);
    return net_->act(bev, state, mode_, rng);
  }

  std::string describe() const override {
    return mode_ == beta::ActMode::Mean ? "beta-mean" : "beta-sample";
  }

 private:
  beta::BetaPolicyNet<float>* net_;
  beta::ActMode mode_;
};

class EbmAgent final : public Agent {
 public:
  EbmAgent(ebm::EnergyNet<float>* net, AgentContext ctx) : net_(net), ctx_(std::move(ctx)) {}

  Action act(const sim::Observation& obs, Rng& rng) override {
    Tensor<float> bev = bev_tensor(obs);
    Tensor<float> state = state_tensor(obs);
    auto octx = net_->encode(bev, state, false);
    dfo::EnergyFn fn = [this, &octx](std::span<const Action> acts) {
      return net_->energies(octx, acts, static_cast<int>(acts.size()), false);
    };
    const dfo::DfoOutcome out =
        dfo::dfo_infer_full(fn, ctx_.dfo, ctx_.expert_actions,
                            ctx_.init_weights.probs.empty() ? nullptr : &ctx_.init_weights, rng);
    ++steps_;
    // ablation bookkeeping: how often the categorical draw agrees with argmax
    if (std::abs(out.chosen.steering - out.argmax.steering) < 0.05f &&
        std::abs(out.chosen.accel - out.argmax.accel) < 0.05f)
      ++argmax_agreement_;
    return out.chosen;
  }

  std::string describe() const override {
    return std::string("ebm-dfo-") +
           (ctx_.dfo.init == dfo::InitKind::ExpertKde ? "expert-init" : "uniform-init") + "-" +
           (ctx_.dfo.ret == dfo::ReturnMode::Categorical ? "categorical" : "argmax");
  }

  const AgentContext& context() const { return ctx_; }
  ebm::EnergyNet<float>* net() { return net_; }

  ordered_json stats() const override {
    ordered_json j;
    j["inference_steps"] = steps_;
    j["argmax_agreement"] =
        steps_ > 0 ? static_cast<double>(argmax_agreement_) / static_cast<double>(steps_) : 0.0;
    return j;
  }

 private:
  ebm::EnergyNet<float>* net_;
  AgentContext ctx_;
  int64_t steps_ = 0;
  int64_t argmax_agreement_ = 0;
};

// Always outputs the zero action; evaluation sanity baseline.
class StationaryAgent final : public Agent {
 public:
  Action act(const sim::Observation&, Rng&) override { return {0.0f, 0.0f}; }
  std::string describe() const override { return "stationary"; }
};

// A trained checkpoint plus the network it parameterizes.
struct LoadedPolicy {
  std::string kind;  // "beta" or "ebm"
  nn::CheckpointInfo info;
  std::unique_ptr<beta::BetaPolicyNet<float>> beta_net;
  std::unique_ptr<ebm::EnergyNet<float>> ebm_net;
};

inline LoadedPolicy load_policy(const std::filesystem::path& path) {
  LoadedPolicy p;
  const auto info = nn::peek_checkpoint(path);
  p.kind = info.policy_kind;
  if (info.policy_kind == "beta") {
    p.beta_net = std::make_unique<beta::BetaPolicyNet<float>>(info.spec, info.seed);
    p.info = nn::load_checkpoint(path, p.beta_net->store());
  } else if (info.policy_kind == "ebm") {
    p.ebm_net = std::make_unique<ebm::EnergyNet<float>>(info.spec, info.seed);
    p.info = nn::load_checkpoint(path, p.ebm_net->store());
  } else {
    throw InputError("checkpoint: unknown policy kind '" + info.policy_kind + "'");
  }
  return p;
}

}  // namespace daibc::harness
