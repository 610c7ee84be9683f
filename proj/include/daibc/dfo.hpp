#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "daibc/common.hpp"
#include "daibc/kde.hpp"
#include "daibc/rng.hpp"

namespace daibc::dfo {

enum class InitKind { Uniform, ExpertKde };
enum class ReturnMode { Categorical, Argmax };

struct DfoConfig {
  int n_samples = 2048;     // desk default (paper 16384)
  int n_iters = 5;
  double sigma_init = 0.5;
  double k_shrink = 0.5;    // geometric decay of the sampling scale
  float y_min = kActionMin;
  float y_max = kActionMax;
  InitKind init = InitKind::ExpertKde;
  ReturnMode ret = ReturnMode::Categorical;

  void validate() const {
    require(n_samples >= 1, "dfo config: n_samples must be >= 1");
    require(n_iters >= 1, "dfo config: n_iters must be >= 1");
    require(sigma_init > 0.0, "dfo config: sigma_init must be positive");
    require(k_shrink > 0.0 && k_shrink < 1.0, "dfo config: k_shrink must be in (0,1)");
    require(y_min < y_max, "dfo config: bounds inverted");
  }
};

// Candidate pool carried across iterations. Probabilities always correspond
// to the energies computed most recently for these actions.
struct SamplePool {
  std::vector<Action> actions;
  std::vector<double> probs;
  std::vector<double> energies;
  double sigma = 0.0;
};

// Batch energy evaluator for a fixed observation.
using EnergyFn = std::function<std::vector<double>(std::span<const Action>)>;

// Optional per-iteration snapshot for landscape figures.
struct DfoTraceRow {
  int iter;
  float steering, accel;
  double energy, prob;
};

inline void write_dfo_trace_csv(const std::filesystem::path& path,
                                std::span<const DfoTraceRow> rows) {
  std::FILE* f = std::fopen(path.string().c_str(), "wb");
  require(f != nullptr, "dfo trace: cannot open " + path.string());
  std::fprintf(f, "iter,steering,accel,energy,prob\n");
  for (const auto& r : rows)
    std::fprintf(f, "%d,%.9g,%.9g,%.12g,%.12g\n", r.iter, static_cast<double>(r.steering),
                 static_cast<double>(r.accel), r.energy, r.prob);
  std::fclose(f);
}

// Pool initialization. Expert-KDE mode draws from a categorical over the
// expert actions with the supplied weights; uniform mode ignores them.
inline SamplePool dfo_init(const DfoConfig& cfg, std::span<const Action> expert_actions,
                           const density::SampleWeights* weights, Rng& rng) {
  cfg.validate();
  SamplePool pool;
  pool.sigma = cfg.sigma_init;
  pool.actions.resize(static_cast<size_t>(cfg.n_samples));
  pool.probs.assign(static_cast<size_t>(cfg.n_samples), 1.0 / cfg.n_samples);
  pool.energies.assign(static_cast<size_t>(cfg.n_samples), 0.0);
  if (cfg.init == InitKind::Uniform) {
    for (auto& a : pool.actions) {
      a.steering = static_cast<float>(rng.uniform(cfg.y_min, cfg.y_max));
      a.accel = static_cast<float>(rng.uniform(cfg.y_min, cfg.y_max));
    }
  } else {
    require(!expert_actions.empty(), "dfo_init: expert-kde init needs a non-empty expert set");
    require(weights != nullptr && weights->probs.size() == expert_actions.size(),
            "dfo_init: weights must match the expert set");
    for (auto& a : pool.actions)
      a = expert_actions[static_cast<size_t>(density::sample_index(*weights, rng))];
  }
  return pool;
}

namespace detail {

inline void softmax_neg_energies(const std::vector<double>& e, std::vector<double>& p) {
  double m = -e[0];
  for (double v : e) m = std::max(m, -v);
  double z = 0.0;
  p.resize(e.size());
  for (size_t i = 0; i < e.size(); ++i) {
    p[i] = std::exp(-e[i] - m);
    z += p[i];
  }
  for (double& v : p) v /= z;
}

// Multinomial resample with replacement via inverse CDF over a sorted batch
// of uniforms; O(N log N) and deterministic under the seeded stream.
inline std::vector<Action> resample(const std::vector<Action>& actions,
                                    const std::vector<double>& probs, Rng& rng) {
  const size_t n = actions.size();
  std::vector<double> us(n);
  for (double& u : us) u = rng.uniform01();
  std::sort(us.begin(), us.end());
  std::vector<Action> out(n);
  double acc = probs[0];
  size_t k = 0;
  for (size_t i = 0; i < n; ++i) {
    while (us[i] > acc && k + 1 < n) acc += probs[++k];
    out[i] = actions[k];
  }
  return out;
}

}  // namespace detail

// One iteration of the optimizer: energies, softmax probabilities and,
// unless this is the final iteration, resample + perturb + clip + shrink.
// The trace snapshot is taken right after the softmax, while actions still
// pair with the probabilities computed for them.
inline void dfo_iterate(SamplePool& pool, const EnergyFn& energy, const DfoConfig& cfg, Rng& rng,
                        bool last, int iter_index = 0, std::vector<DfoTraceRow>* trace = nullptr) {
  pool.energies = energy(pool.actions);
  require(pool.energies.size() == pool.actions.size(), "dfo_iterate: energy count mismatch");
  for (double e : pool.energies) require_finite(e, "dfo energy");
  detail::softmax_neg_energies(pool.energies, pool.probs);
  if (trace != nullptr)
    for (size_t i = 0; i < pool.actions.size(); ++i)
      trace->push_back({iter_index, pool.actions[i].steering, pool.actions[i].accel,
                        pool.energies[i], pool.probs[i]});
  if (last) return;
  pool.actions = detail::resample(pool.actions, pool.probs, rng);
  for (auto& a : pool.actions) {
    a.steering = static_cast<float>(std::clamp(a.steering + pool.sigma * rng.normal(),
                                               static_cast<double>(cfg.y_min),
                                               static_cast<double>(cfg.y_max)));
    a.accel = static_cast<float>(std::clamp(a.accel + pool.sigma * rng.normal(),
                                            static_cast<double>(cfg.y_min),
                                            static_cast<double>(cfg.y_max)));
  }
  pool.sigma *= cfg.k_shrink;
}

struct DfoOutcome {
  Action chosen;  // per the configured return mode
  Action argmax;  // ablation variant: highest-probability pool member
};

// Full inference: init, n_iters iterations, then a draw from the categorical
// over the final pool. The argmax variant is returned alongside so callers
// can log the ablation without a second run.
inline DfoOutcome dfo_infer_full(const EnergyFn& energy, const DfoConfig& cfg,
                                 std::span<const Action> expert_actions,
                                 const density::SampleWeights* weights, Rng& rng,
                                 std::vector<DfoTraceRow>* trace = nullptr) {
  SamplePool pool = dfo_init(cfg, expert_actions, weights, rng);
  for (int it = 1; it <= cfg.n_iters; ++it)
    dfo_iterate(pool, energy, cfg, rng, it == cfg.n_iters, it, trace);
  size_t best = 0;
  for (size_t i = 1; i < pool.probs.size(); ++i)
    if (pool.probs[i] > pool.probs[best]) best = i;
  DfoOutcome out;
  out.argmax = pool.actions[best];
  if (cfg.ret == ReturnMode::Argmax) {
    out.chosen = out.argmax;
  } else {
    const double u = rng.uniform01();
    double acc = 0.0;
    size_t pick = pool.probs.size() - 1;
    for (size_t i = 0; i < pool.probs.size(); ++i) {
      acc += pool.probs[i];
      if (u <= acc) {
        pick = i;
        break;
      }
    }
    out.chosen = pool.actions[pick];
  }
  return out;
}

inline Action dfo_infer(const EnergyFn& energy, const DfoConfig& cfg,
                        std::span<const Action> expert_actions,
                        const density::SampleWeights* weights, Rng& rng,
                        std::vector<DfoTraceRow>* trace = nullptr) {
  return dfo_infer_full(energy, cfg, expert_actions, weights, rng, trace).chosen;
}

}  // namespace daibc::dfo
