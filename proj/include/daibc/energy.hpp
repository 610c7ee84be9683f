#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "daibc/common.hpp"
#include "daibc/nn.hpp"
#include "daibc/obs_tower.hpp"
#include "daibc/rng.hpp"

namespace daibc::ebm {

enum class NegSampler { Uniform, ExpertPerturbed };

inline std::string neg_sampler_name(NegSampler s) {
  return s == NegSampler::Uniform ? "uniform" : "expert-perturbed";
}

struct EbmTrainConfig {
  int n_neg = 256;
  double sigma_neg = 0.1;  // DA perturbation scale, action units
  NegSampler sampler = NegSampler::ExpertPerturbed;
  float y_min = kActionMin;
  float y_max = kActionMax;

  void validate() const {
    require(n_neg >= 1, "ebm config: n_neg must be >= 1");
    require(sigma_neg >= 0.0, "ebm config: sigma_neg must be >= 0");
    require(y_min < y_max, "ebm config: y_min must be < y_max");
  }
};

// Counterexamples per batch element: element i owns the block
// [i*n_neg, (i+1)*n_neg).
struct NegativeSet {
  int n_neg = 0;
  std::vector<Action> actions;

  int batch() const { return n_neg > 0 ? static_cast<int>(actions.size()) / n_neg : 0; }

  void validate(float lo, float hi) const {
    require(n_neg >= 1 && actions.size() % static_cast<size_t>(n_neg) == 0,
            "negative set: ragged layout");
    for (const Action& a : actions)
      require(a.steering >= lo && a.steering <= hi && a.accel >= lo && a.accel <= hi,
              "negative set: counterexample out of bounds");
  }
};

// i.i.d. uniform over the action box, independent of observations and of the
// expert set.
inline NegativeSet sample_negatives_uniform(int batch, const EbmTrainConfig& cfg, Rng& rng) {
  cfg.validate();
  NegativeSet out;
  out.n_neg = cfg.n_neg;
  out.actions.resize(static_cast<size_t>(batch) * cfg.n_neg);
  for (auto& a : out.actions) {
    a.steering = static_cast<float>(rng.uniform(cfg.y_min, cfg.y_max));
    a.accel = static_cast<float>(rng.uniform(cfg.y_min, cfg.y_max));
  }
  return out;
}

// Expert-perturbed counterexamples: sample with replacement from the given
// expert action minibatch, add isotropic Gaussian noise, clip to bounds. The
// set is regenerated fresh every call and does not depend on any x_i.
inline NegativeSet sample_negatives_da(std::span<const Action> expert_actions, int batch,
                                       const EbmTrainConfig& cfg, Rng& rng) {
  cfg.validate();
  require(!expert_actions.empty(), "sample_negatives_da: empty expert minibatch");
  NegativeSet out;
  out.n_neg = cfg.n_neg;
  out.actions.resize(static_cast<size_t>(batch) * cfg.n_neg);
  const int m = static_cast<int>(expert_actions.size());
  for (auto& a : out.actions) {
    const Action& e = expert_actions[static_cast<size_t>(rng.below(m))];
    a.steering = static_cast<float>(
        std::clamp(e.steering + cfg.sigma_neg * rng.normal(), static_cast<double>(cfg.y_min),
                   static_cast<double>(cfg.y_max)));
    a.accel = static_cast<float>(
        std::clamp(e.accel + cfg.sigma_neg * rng.normal(), static_cast<double>(cfg.y_min),
                   static_cast<double>(cfg.y_max)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// InfoNCE algebra on raw energies, in double with log-sum-exp stabilization.
// ---------------------------------------------------------------------------

struct InfoNceTerm {
  double p_tilde = 0.0;       // softmax probability of the positive
  double loss = 0.0;          // -w * log p_tilde
  double g_pos = 0.0;         // d loss / d E(x, y)
  std::vector<double> g_neg;  // d loss / d E(x, y~_j)
};

inline InfoNceTerm infonce_term(double e_pos, std::span<const double> e_negs, double w = 1.0) {
  require_finite(e_pos, "infonce energy");
  double m = -e_pos;  // max logit
  for (double e : e_negs) {
    require_finite(e, "infonce energy");
    m = std::max(m, -e);
  }
  const double s_pos = std::exp(-e_pos - m);
  double z = s_pos;
  for (double e : e_negs) z += std::exp(-e - m);
  InfoNceTerm t;
  t.p_tilde = s_pos / z;
  t.loss = -w * (std::log(s_pos) - std::log(z));
  t.g_pos = w * (1.0 - t.p_tilde);
  t.g_neg.resize(e_negs.size());
  for (size_t j = 0; j < e_negs.size(); ++j) t.g_neg[j] = -w * std::exp(-e_negs[j] - m) / z;
  return t;
}

// ---------------------------------------------------------------------------
// Conditional energy network E(x, y).
// ---------------------------------------------------------------------------

// Observation tower feeds a fusion MLP whose first layer is split into an
// observation part and an action part, so the observation contribution is
// computed once per x and reused across every action in a batch.
template <class T>
class EnergyNet {
 public:
  EnergyNet(const nn::NetworkSpec& spec, uint64_t seed) : spec_(spec) {
    spec_.head_out = 1;
    spec_.validate();
    require(!spec_.head_widths.empty(), "energy net: head_widths must be non-empty");
    tower_ = nn::ObsTower<T>(store_, spec_);
    const int h1 = spec_.head_widths[0];
    fuse_obs_ = nn::DenseLayer<T>(store_, "fuse.obs", tower_.out_dim(), h1);
    w_act_ = &store_.add("fuse.act.W", {h1, 2});
    std::vector<int> rest(spec_.head_widths.begin() + 1, spec_.head_widths.end());
    fuse_rest_ = nn::Mlp<T>(store_, "fuse.rest", h1, rest, 1, false);
    store_.init_uniform_fanin(seed);
    seed_ = seed;
  }

  nn::ParamStore<T>& store() { return store_; }
  const nn::NetworkSpec& spec() const { return spec_; }
  uint64_t seed() const { return seed_; }

  struct ObsContext {
    int batch = 0;
    Tensor<T> f1_obs;  // [B, h1] pre-activation observation contribution
  };

  ObsContext encode(const Tensor<T>& bev, const Tensor<T>& state, bool keep) {
    ObsContext ctx;
    ctx.batch = bev.dim(0);
    Tensor<T> emb = tower_.forward(bev, state, keep);
    ctx.f1_obs = fuse_obs_.forward(emb, keep);
    return ctx;
  }

  // Energies for `per_element` actions per context row; `acts` holds the
  // blocks back to back (acts.size() == B * per_element). Output is double.
  std::vector<double> energies(const ObsContext& ctx, std::span<const Action> acts,
                               int per_element, bool keep = false) {
    const int B = ctx.batch;
    const int M = per_element;
    require_shape(static_cast<int>(acts.size()) == B * M, "energies: action layout mismatch");
    const int h1 = fuse_obs_.out();
    const int rows = B * M;
    Tensor<T> amat({rows, 2});
    for (int r = 0; r < rows; ++r) {
      amat.at(r, 0) = static_cast<T>(acts[static_cast<size_t>(r)].steering);
      amat.at(r, 1) = static_cast<T>(acts[static_cast<size_t>(r)].accel);
    }
    Tensor<T> z1({rows, h1});
    gemm_nt(amat.data(), w_act_->value.data(), z1.data(), rows, 2, h1);
    for (int i = 0; i < B; ++i) {
      const T* obs = ctx.f1_obs.data() + static_cast<int64_t>(i) * h1;
      for (int j = 0; j < M; ++j) {
        T* row = z1.data() + (static_cast<int64_t>(i) * M + j) * h1;
        for (int k = 0; k < h1; ++k) {
          T v = row[k] + obs[k];
          row[k] = v > T(0) ? v : T(0);
        }
      }
    }
    if (keep) {
      amat_ = amat;
      z1_ = z1;
    }
    Tensor<T> e = fuse_rest_.forward(z1, keep);
    std::vector<double> out(static_cast<size_t>(rows));
    for (int r = 0; r < rows; ++r) {
      out[static_cast<size_t>(r)] = static_cast<double>(e[r]);
      require_finite(out[static_cast<size_t>(r)], "energy output");
    }
    return out;
  }

  // Convenience single-observation entry: one x, M candidate actions.
  std::vector<double> energy_batch(const Tensor<T>& bev1, const Tensor<T>& state1,
                                   std::span<const Action> ys) {
    require(!ys.empty(), "energy: empty action list");
    for (const Action& a : ys) require(action_in_bounds(a), "energy: action out of bounds");
    ObsContext ctx = encode(bev1, state1, false);
    require_shape(ctx.batch == 1, "energy_batch: expected a single observation");
    return energies(ctx, ys, static_cast<int>(ys.size()), false);
  }

  struct InfoNceResult {
    double loss = 0.0;                    // Eq-style sum over batch elements
    std::vector<double> p_tilde;          // per element
    std::vector<double> per_element_loss; // -w_i log p_tilde_i
  };

  // InfoNCE loss over a batch with per-element negative sets; accumulates
  // parameter gradients. Weights default to 1.
  InfoNceResult loss_and_grad(const Tensor<T>& bev, const Tensor<T>& state,
                              std::span<const Action> positives, const NegativeSet& negs,
                              std::span<const double> weights = {}) {
    const int B = bev.dim(0);
    require(static_cast<int>(positives.size()) == B, "infonce: positives/batch mismatch");
    require(negs.batch() == B, "infonce: negative set misaligned with batch");
    require(weights.empty() || static_cast<int>(weights.size()) == B,
            "infonce: weight count mismatch");
    const int M = 1 + negs.n_neg;

    // interleave positive + negatives per element
    std::vector<Action> acts(static_cast<size_t>(B) * M);
    for (int i = 0; i < B; ++i) {
      acts[static_cast<size_t>(i) * M] = positives[static_cast<size_t>(i)];
      for (int j = 0; j < negs.n_neg; ++j)
        acts[static_cast<size_t>(i) * M + 1 + j] =
            negs.actions[static_cast<size_t>(i) * negs.n_neg + j];
    }

    ObsContext ctx = encode(bev, state, true);
    std::vector<double> e = energies(ctx, acts, M, true);

    InfoNceResult res;
    res.p_tilde.resize(static_cast<size_t>(B));
    res.per_element_loss.resize(static_cast<size_t>(B));
    std::vector<double> ge(static_cast<size_t>(B) * M);
    for (int i = 0; i < B; ++i) {
      const double w = weights.empty() ? 1.0 : weights[static_cast<size_t>(i)];
      const double* ei = e.data() + static_cast<size_t>(i) * M;
      InfoNceTerm t =
          infonce_term(ei[0], std::span<const double>(ei + 1, static_cast<size_t>(negs.n_neg)), w);
      res.p_tilde[static_cast<size_t>(i)] = t.p_tilde;
      res.per_element_loss[static_cast<size_t>(i)] = t.loss;
      res.loss += t.loss;
      ge[static_cast<size_t>(i) * M] = t.g_pos;
      for (int j = 0; j < negs.n_neg; ++j)
        ge[static_cast<size_t>(i) * M + 1 + j] = t.g_neg[static_cast<size_t>(j)];
    }
    require_finite(res.loss, "infonce loss");
    backward(ctx, ge, B, M);
    return res;
  }

 private:
  void backward(ObsContext& ctx, const std::vector<double>& ge, int B, int M) {
    const int rows = B * M;
    const int h1 = fuse_obs_.out();
    Tensor<T> gout({rows, 1});
    for (int r = 0; r < rows; ++r) gout[r] = static_cast<T>(ge[static_cast<size_t>(r)]);
    Tensor<T> gz1 = fuse_rest_.backward(gout);
    for (int64_t i = 0; i < gz1.numel(); ++i)
      if (z1_[i] <= T(0)) gz1[i] = T(0);
    gemm_tn_acc(gz1.data(), amat_.data(), w_act_->grad.data(), rows, h1, 2);
    Tensor<T> gobs({B, h1});
    for (int i = 0; i < B; ++i) {
      T* dst = gobs.data() + static_cast<int64_t>(i) * h1;
      for (int j = 0; j < M; ++j) {
        const T* src = gz1.data() + (static_cast<int64_t>(i) * M + j) * h1;
        for (int k = 0; k < h1; ++k) dst[k] += src[k];
      }
    }
    Tensor<T> gemb = fuse_obs_.backward(gobs);
    tower_.backward(gemb);
  }

  nn::NetworkSpec spec_;
  nn::ParamStore<T> store_;
  nn::ObsTower<T> tower_;
  nn::DenseLayer<T> fuse_obs_;
  nn::Parameter<T>* w_act_ = nullptr;
  nn::Mlp<T> fuse_rest_;
  Tensor<T> amat_, z1_;
  uint64_t seed_ = 0;
};

}  // namespace daibc::ebm
