#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <span>
#include <vector>

#include "daibc/common.hpp"
#include "daibc/rng.hpp"

namespace daibc::density {

// Standard 1D Gaussian kernel K(u) = exp(-u^2/2) / sqrt(2*pi).
inline double gaussian_kernel(double u) {
  return std::exp(-0.5 * u * u) / std::sqrt(2.0 * M_PI);
}

// Gaussian KDE with a shared scalar bandwidth. Multivariate points use the
// product kernel, so the normalizer is 1/(N * h^d). Immutable after fit;
// evaluation is thread-safe.
class KdeModel {
 public:
  KdeModel(std::vector<double> flat_points, int dim, double bandwidth)
      : points_(std::move(flat_points)), dim_(dim), h_(bandwidth) {
    require(dim_ >= 1, "kde: dimension must be >= 1");
    require(h_ > 0.0, "kde: bandwidth must be positive");
    require(!points_.empty() && points_.size() % static_cast<size_t>(dim_) == 0,
            "kde: empty or ragged point set");
    n_ = points_.size() / static_cast<size_t>(dim_);
    norm_ = 1.0 / (static_cast<double>(n_) * std::pow(h_, dim_));
  }

  size_t size() const { return n_; }
  int dim() const { return dim_; }
  double bandwidth() const { return h_; }

  // Density at x; strictly positive for finite x (Gaussian has full support).
  double eval(std::span<const double> x) const {
    require(x.size() == static_cast<size_t>(dim_), "kde_eval: dimension mismatch");
    for (double v : x) require_finite(v, "kde_eval input");
    double acc = 0.0;  // double accumulation over the support set
    for (size_t j = 0; j < n_; ++j) {
      double k = 1.0;
      for (int d = 0; d < dim_; ++d)
        k *= gaussian_kernel((x[static_cast<size_t>(d)] - points_[j * dim_ + d]) / h_);
      acc += k;
    }
    return acc * norm_;
  }

  double eval1(double x) const { return eval(std::span<const double>(&x, 1)); }

  double eval_action(const Action& a) const {
    const double p[2] = {static_cast<double>(a.steering), static_cast<double>(a.accel)};
    return eval(std::span<const double>(p, 2));
  }

 private:
  std::vector<double> points_;  // n * dim, row-major
  int dim_;
  double h_;
  size_t n_ = 0;
  double norm_ = 0.0;
};

inline KdeModel kde_fit(std::span<const Action> actions, double bandwidth) {
  require(!actions.empty(), "kde_fit: empty action set");
  std::vector<double> flat;
  flat.reserve(actions.size() * 2);
  for (const Action& a : actions) {
    flat.push_back(a.steering);
    flat.push_back(a.accel);
  }
  return KdeModel(std::move(flat), 2, bandwidth);
}

// Per-record sampling weights: clamped inverse densities plus the normalized
// probabilities and their running CDF.
struct SampleWeights {
  std::vector<double> weights;  // > 0
  std::vector<double> probs;    // sums to 1
  std::vector<double> cdf;      // inclusive running sums, back() == 1
};

struct WeightClamp {
  // bounds are multiples of the median raw weight
  double lo = 1e-3;
  double hi = 1e3;
};

// w_i = 1 / g(y_i), clamped to [lo, hi] x median before normalization. The
// clamp keeps isolated actions from dominating the sampler.
inline SampleWeights make_sample_weights(std::vector<double> raw) {
  require(!raw.empty(), "sample weights: empty input");
  SampleWeights sw;
  sw.weights = std::move(raw);
  double sum = 0.0;
  for (double w : sw.weights) {
    require(w > 0.0 && std::isfinite(w), "sample weights: weights must be positive finite");
    sum += w;
  }
  sw.probs.resize(sw.weights.size());
  sw.cdf.resize(sw.weights.size());
  double acc = 0.0;
  for (size_t i = 0; i < sw.weights.size(); ++i) {
    sw.probs[i] = sw.weights[i] / sum;
    acc += sw.probs[i];
    sw.cdf[i] = acc;
  }
  sw.cdf.back() = 1.0;
  return sw;
}

inline SampleWeights inverse_density_weights(const KdeModel& model,
                                             std::span<const Action> actions,
                                             const WeightClamp& clamp = {}) {
  require(!actions.empty(), "inverse_density_weights: empty action set");
  std::vector<double> w(actions.size());
  for (size_t i = 0; i < actions.size(); ++i) w[i] = 1.0 / model.eval_action(actions[i]);
  std::vector<double> sorted = w;
  std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
  const double median = sorted[sorted.size() / 2];
  const double lo = clamp.lo * median, hi = clamp.hi * median;
  for (double& x : w) x = std::clamp(x, lo, hi);
  return make_sample_weights(std::move(w));
}

// Density-proportional variant (w_i = g(y_i)); kept for the DFO init switch.
inline SampleWeights density_weights(const KdeModel& model, std::span<const Action> actions) {
  require(!actions.empty(), "density_weights: empty action set");
  std::vector<double> w(actions.size());
  for (size_t i = 0; i < actions.size(); ++i) w[i] = model.eval_action(actions[i]);
  return make_sample_weights(std::move(w));
}

// One draw proportional to probs via inverse CDF.
inline int sample_index(const SampleWeights& sw, Rng& rng) {
  const double u = rng.uniform01();
  auto it = std::lower_bound(sw.cdf.begin(), sw.cdf.end(), u);
  if (it == sw.cdf.end()) --it;
  return static_cast<int>(it - sw.cdf.begin());
}

// n indices drawn i.i.d. with replacement proportional to probs. n larger
// than the dataset is legal.
inline std::vector<int> weighted_minibatch(const SampleWeights& sw, int n, Rng& rng) {
  require(n >= 1, "weighted_minibatch: n must be >= 1");
  std::vector<int> idx(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) idx[static_cast<size_t>(i)] = sample_index(sw, rng);
  return idx;
}

// Inspection export: index, action components, density, clamped weight.
inline void write_weights_csv(const std::filesystem::path& path, const KdeModel& model,
                              std::span<const Action> actions, const SampleWeights& sw) {
  std::FILE* f = std::fopen(path.string().c_str(), "wb");
  require(f != nullptr, "write_weights_csv: cannot open " + path.string());
  std::fprintf(f, "index,steering,accel,density,weight\n");
  for (size_t i = 0; i < actions.size(); ++i) {
    std::fprintf(f, "%zu,%.9g,%.9g,%.12g,%.12g\n", i,
                 static_cast<double>(actions[i].steering), static_cast<double>(actions[i].accel),
                 model.eval_action(actions[i]), sw.weights[i]);
  }
  std::fclose(f);
}

}  // namespace daibc::density
