#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "daibc/common.hpp"
#include "daibc/nn.hpp"
#include "daibc/obs_tower.hpp"
#include "daibc/rng.hpp"

namespace daibc::beta {

// Maps an action from [-1,1]^2 onto the unit square: y' = (y + 1) / 2.
inline std::array<double, 2> rescale_action(const Action& a) {
  require(action_in_bounds(a), "rescale_action: action out of [-1,1] bounds");
  return {(static_cast<double>(a.steering) + 1.0) / 2.0,
          (static_cast<double>(a.accel) + 1.0) / 2.0};
}

inline Action unrescale_action(double z_steer, double z_accel) {
  return clip_action({static_cast<float>(2.0 * z_steer - 1.0),
                      static_cast<float>(2.0 * z_accel - 1.0)});
}

// Digamma via recurrence into the asymptotic range.
inline double digamma(double x) {
  double r = 0.0;
  while (x < 10.0) {
    r -= 1.0 / x;
    x += 1.0;
  }
  const double x1 = 1.0 / x, x2 = x1 * x1;
  r += std::log(x) - 0.5 * x1 -
       x2 * (1.0 / 12.0 - x2 * (1.0 / 120.0 - x2 * (1.0 / 252.0 - x2 / 240.0)));
  return r;
}

inline double log_beta_fn(double a, double b) {
  return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

// log f(z; alpha, beta) for z in (0,1).
inline double beta_log_pdf(double z, double alpha, double beta) {
  require(alpha > 0.0 && beta > 0.0, "beta_log_pdf: alpha and beta must be positive");
  return (alpha - 1.0) * std::log(z) + (beta - 1.0) * std::log1p(-z) - log_beta_fn(alpha, beta);
}

inline double softplus(double x) { return x > 20.0 ? x : std::log1p(std::exp(x)); }
inline double sigmoid(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

// Head transform keeping the Beta unimodal: alpha = 1 + softplus(u).
inline double head_to_param(double u) { return 1.0 + softplus(u); }

// Expert actions at the bounds would otherwise give infinite NLL.
inline constexpr double kZClamp = 1e-4;

inline double clamp_unit(double z) { return std::clamp(z, kZClamp, 1.0 - kZClamp); }

// Gamma(alpha, 1) via Marsaglia-Tsang; the alpha < 1 boost keeps it total.
inline double gamma_sample(double alpha, Rng& rng) {
  if (alpha < 1.0) {
    const double u = rng.uniform01();
    return gamma_sample(alpha + 1.0, rng) * std::pow(u > 0.0 ? u : 1e-300, 1.0 / alpha);
  }
  const double d = alpha - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x = rng.normal();
    double t = 1.0 + c * x;
    if (t <= 0.0) continue;
    const double v = t * t * t;
    const double u = rng.uniform01();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

inline double beta_sample(double alpha, double beta, Rng& rng) {
  const double x = gamma_sample(alpha, rng);
  const double y = gamma_sample(beta, rng);
  return x / (x + y);
}

enum class ActMode { Mean, Sample };

// Per-dimension Beta parameters for one observation, in action order.
struct BetaHead {
  double alpha_steer, beta_steer, alpha_accel, beta_accel;
};

// Explicit BC baseline: observation tower plus a 4-output head modeling one
// Beta distribution per action dimension.
template <class T>
class BetaPolicyNet {
 public:
  BetaPolicyNet(const nn::NetworkSpec& spec, uint64_t seed) : spec_(spec) {
    spec_.head_out = 4;
    spec_.validate();
    tower_ = nn::ObsTower<T>(store_, spec_);
    head_ = nn::Mlp<T>(store_, "head", tower_.out_dim(), spec_.head_widths, 4, false);
    store_.init_uniform_fanin(seed);
    seed_ = seed;
  }

  nn::ParamStore<T>& store() { return store_; }
  const nn::NetworkSpec& spec() const { return spec_; }
  uint64_t seed() const { return seed_; }

  // Raw head outputs [B,4] in order [steer_u, steer_v, accel_u, accel_v].
  Tensor<T> forward_raw(const Tensor<T>& bev, const Tensor<T>& state, bool keep) {
    Tensor<T> emb = tower_.forward(bev, state, keep);
    return head_.forward(emb, keep);
  }

  BetaHead head_params(const Tensor<T>& raw, int row) const {
    const T* r = raw.data() + static_cast<int64_t>(row) * 4;
    return {head_to_param(static_cast<double>(r[0])), head_to_param(static_cast<double>(r[1])),
            head_to_param(static_cast<double>(r[2])), head_to_param(static_cast<double>(r[3]))};
  }

  // Eq-style NLL: mean over the batch of the two per-dimension terms, each
  // optionally weighted. Accumulates parameter gradients.
  double loss_and_grad(const Tensor<T>& bev, const Tensor<T>& state,
                       std::span<const Action> actions, std::span<const double> weights = {}) {
    const int B = bev.dim(0);
    require(static_cast<int>(actions.size()) == B, "bc_loss: batch/action count mismatch");
    require(weights.empty() || static_cast<int>(weights.size()) == B,
            "bc_loss: weight count mismatch");
    Tensor<T> raw = forward_raw(bev, state, true);
    require(raw.all_finite(), "bc_loss: non-finite head output");

    Tensor<T> graw({B, 4});
    double loss = 0.0;  // accumulated in double
    for (int i = 0; i < B; ++i) {
      const double w = weights.empty() ? 1.0 : weights[static_cast<size_t>(i)];
      const auto z = rescale_action(actions[static_cast<size_t>(i)]);
      const T* r = raw.data() + static_cast<int64_t>(i) * 4;
      T* g = graw.data() + static_cast<int64_t>(i) * 4;
      for (int d = 0; d < 2; ++d) {
        const double u = static_cast<double>(r[2 * d]);
        const double v = static_cast<double>(r[2 * d + 1]);
        const double alpha = head_to_param(u);
        const double betap = head_to_param(v);
        const double zc = clamp_unit(z[static_cast<size_t>(d)]);
        loss += -w * beta_log_pdf(zc, alpha, betap);
        const double psi_ab = digamma(alpha + betap);
        const double dnll_da = digamma(alpha) - psi_ab - std::log(zc);
        const double dnll_db = digamma(betap) - psi_ab - std::log1p(-zc);
        const double scale = w / static_cast<double>(B);
        g[2 * d] = static_cast<T>(scale * dnll_da * sigmoid(u));
        g[2 * d + 1] = static_cast<T>(scale * dnll_db * sigmoid(v));
      }
    }
    loss /= static_cast<double>(B);
    Tensor<T> gemb = head_.backward(graw);
    tower_.backward(gemb);
    require_finite(loss, "bc_loss");
    return loss;
  }

  // Single-observation action. Mean mode returns 2*alpha/(alpha+beta) - 1 per
  // dimension; sample mode draws from the Beta and rescales.
  Action act(const Tensor<T>& bev1, const Tensor<T>& state1, ActMode mode, Rng& rng) {
    Tensor<T> raw = forward_raw(bev1, state1, false);
    const BetaHead h = head_params(raw, 0);
    double zs, za;
    if (mode == ActMode::Mean) {
      zs = h.alpha_steer / (h.alpha_steer + h.beta_steer);
      za = h.alpha_accel / (h.alpha_accel + h.beta_accel);
    } else {
      zs = beta_sample(h.alpha_steer, h.beta_steer, rng);
      za = beta_sample(h.alpha_accel, h.beta_accel, rng);
    }
    return unrescale_action(zs, za);
  }

 private:
  nn::NetworkSpec spec_;
  nn::ParamStore<T> store_;
  nn::ObsTower<T> tower_;
  nn::Mlp<T> head_;
  uint64_t seed_ = 0;
};

}  // namespace daibc::beta
