#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "daibc/common.hpp"
#include "daibc/linalg.hpp"
#include "daibc/rng.hpp"
#include "daibc/tensor.hpp"

namespace daibc::nn {

template <class T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
  Tensor<T> m;  // ADAM first moment
  Tensor<T> v;  // ADAM second moment
};

// Owns all parameters of one network in declaration order (the checkpoint
// payload order) plus the ADAM step count shared by every parameter.
template <class T>
class ParamStore {
 public:
  Parameter<T>& add(const std::string& name, std::vector<int> shape) {
    auto p = std::make_unique<Parameter<T>>();
    p->name = name;
    p->value = Tensor<T>(shape);
    p->grad = Tensor<T>(shape);
    p->m = Tensor<T>(shape);
    p->v = Tensor<T>(std::move(shape));
    params_.push_back(std::move(p));
    return *params_.back();
  }

  std::vector<std::unique_ptr<Parameter<T>>>& params() { return params_; }
  const std::vector<std::unique_ptr<Parameter<T>>>& params() const { return params_; }

  Parameter<T>* find(const std::string& name) {
    for (auto& p : params_)
      if (p->name == name) return p.get();
    return nullptr;
  }

  int64_t param_count() const {
    int64_t n = 0;
    for (auto& p : params_) n += p->value.numel();
    return n;
  }

  void zero_grad() {
    for (auto& p : params_) p->grad.fill(T(0));
  }

  // Uniform fan-in init, U(-1/sqrt(fan_in), 1/sqrt(fan_in)); biases zero.
  void init_uniform_fanin(uint64_t seed) {
    Rng rng(Rng::mix(seed, 0x1717));
    for (auto& p : params_) {
      if (p->value.rank() >= 2) {
        int fan_in = static_cast<int>(p->value.numel() / p->value.dim(0));
        double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (int64_t i = 0; i < p->value.numel(); ++i)
          p->value[i] = static_cast<T>(rng.uniform(-bound, bound));
      } else {
        p->value.fill(T(0));
      }
    }
  }

  int64_t adam_step_count = 0;

 private:
  std::vector<std::unique_ptr<Parameter<T>>> params_;
};

struct AdamConfig {
  double lr = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// One ADAM update over every parameter; grads must already be accumulated.
template <class T>
void adam_step(ParamStore<T>& store, const AdamConfig& cfg) {
  store.adam_step_count += 1;
  const double t = static_cast<double>(store.adam_step_count);
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);
  for (auto& p : store.params()) {
    require_shape(p->grad.same_shape(p->value), "adam_step: grad shape mismatch for " + p->name);
    for (int64_t i = 0; i < p->value.numel(); ++i) {
      const double g = static_cast<double>(p->grad[i]);
      if (!std::isfinite(g)) throw NumericError("adam_step: non-finite gradient in " + p->name);
      double m = cfg.beta1 * static_cast<double>(p->m[i]) + (1.0 - cfg.beta1) * g;
      double v = cfg.beta2 * static_cast<double>(p->v[i]) + (1.0 - cfg.beta2) * g * g;
      p->m[i] = static_cast<T>(m);
      p->v[i] = static_cast<T>(v);
      const double mhat = m / bc1;
      const double vhat = v / bc2;
      p->value[i] = static_cast<T>(static_cast<double>(p->value[i]) -
                                   cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps));
    }
  }
}

// Scale all gradients so their global L2 norm is at most max_norm. Tames the
// unbounded boundary terms of the Beta NLL without touching its optimum.
template <class T>
double clip_grad_norm(ParamStore<T>& store, double max_norm) {
  double sq = 0.0;
  for (auto& p : store.params())
    for (int64_t i = 0; i < p->grad.numel(); ++i) {
      const double g = static_cast<double>(p->grad[i]);
      sq += g * g;
    }
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double scale = max_norm / norm;
    for (auto& p : store.params())
      for (int64_t i = 0; i < p->grad.numel(); ++i)
        p->grad[i] = static_cast<T>(static_cast<double>(p->grad[i]) * scale);
  }
  return norm;
}

// ---------------------------------------------------------------------------
// Layers. Each caches what its backward pass needs when `keep` is set and
// accumulates parameter gradients into the store.
// ---------------------------------------------------------------------------

template <class T>
class DenseLayer {
 public:
  DenseLayer() = default;
  DenseLayer(ParamStore<T>& store, const std::string& name, int in, int out)
      : name_(name), in_(in), out_(out) {
    W_ = &store.add(name + ".W", {out, in});
    b_ = &store.add(name + ".b", {out});
  }

  // x: [B, in] -> [B, out]
  Tensor<T> forward(const Tensor<T>& x, bool keep) {
    require_shape(x.rank() == 2 && x.dim(1) == in_,
                  "dense layer '" + name_ + "': input shape " + shape_str(x.shape()) +
                      " does not match in=" + std::to_string(in_));
    const int B = x.dim(0);
    Tensor<T> y({B, out_});
    gemm_nt(x.data(), W_->value.data(), y.data(), B, in_, out_);
    for (int r = 0; r < B; ++r)
      for (int c = 0; c < out_; ++c) y.at(r, c) += b_->value[c];
    if (keep) x_ = x;
    return y;
  }

  // g: [B, out] -> [B, in]
  Tensor<T> backward(const Tensor<T>& g) {
    require_shape(g.rank() == 2 && g.dim(1) == out_ && g.dim(0) == x_.dim(0),
                  "dense layer '" + name_ + "': upstream gradient shape mismatch");
    const int B = g.dim(0);
    gemm_tn_acc(g.data(), x_.data(), W_->grad.data(), B, out_, in_);
    colsum_acc(g.data(), b_->grad.data(), B, out_);
    Tensor<T> gx({B, in_});
    gemm_nn(g.data(), W_->value.data(), gx.data(), B, out_, in_);
    return gx;
  }

  int in() const { return in_; }
  int out() const { return out_; }
  Parameter<T>& W() { return *W_; }
  Parameter<T>& b() { return *b_; }

 private:
  std::string name_;
  int in_ = 0, out_ = 0;
  Parameter<T>* W_ = nullptr;
  Parameter<T>* b_ = nullptr;
  Tensor<T> x_;
};

template <class T>
class ReluLayer {
 public:
  Tensor<T> forward(const Tensor<T>& x, bool keep) {
    Tensor<T> y = x;
    for (int64_t i = 0; i < y.numel(); ++i)
      if (y[i] < T(0)) y[i] = T(0);
    if (keep) y_ = y;
    return y;
  }

  Tensor<T> backward(const Tensor<T>& g) {
    Tensor<T> gx = g;
    for (int64_t i = 0; i < gx.numel(); ++i)
      if (y_[i] <= T(0)) gx[i] = T(0);
    return gx;
  }

 private:
  Tensor<T> y_;
};

// 3x3 convolution, stride 2, pad 1, implemented as im2col + GEMM.
template <class T>
class Conv2dLayer {
 public:
  Conv2dLayer() = default;
  Conv2dLayer(ParamStore<T>& store, const std::string& name, int ic, int oc, int ih, int iw)
      : name_(name), ic_(ic), oc_(oc), ih_(ih), iw_(iw) {
    oh_ = (ih_ - 1) / 2 + 1;
    ow_ = (iw_ - 1) / 2 + 1;
    W_ = &store.add(name + ".W", {oc, ic * 9});
    b_ = &store.add(name + ".b", {oc});
  }

  int out_h() const { return oh_; }
  int out_w() const { return ow_; }
  int out_c() const { return oc_; }

  // x: [B, ic, ih, iw] -> [B, oc, oh, ow]
  Tensor<T> forward(const Tensor<T>& x, bool keep) {
    require_shape(x.rank() == 4 && x.dim(1) == ic_ && x.dim(2) == ih_ && x.dim(3) == iw_,
                  "conv layer '" + name_ + "': input shape " + shape_str(x.shape()) +
                      " does not match [*, " + std::to_string(ic_) + ", " +
                      std::to_string(ih_) + ", " + std::to_string(iw_) + "]");
    const int B = x.dim(0);
    const int rows = B * oh_ * ow_;
    Tensor<T> cols({rows, ic_ * 9});
    im2col(x, cols);
    Tensor<T> ymat({rows, oc_});
    gemm_nt(cols.data(), W_->value.data(), ymat.data(), rows, ic_ * 9, oc_);
    Tensor<T> y({B, oc_, oh_, ow_});
    const int hw = oh_ * ow_;
    for (int s = 0; s < B; ++s)
      for (int c = 0; c < oc_; ++c) {
        T bias = b_->value[c];
        T* dst = y.data() + (static_cast<int64_t>(s) * oc_ + c) * hw;
        const T* src = ymat.data() + static_cast<int64_t>(s) * hw * oc_ + c;
        for (int i = 0; i < hw; ++i) dst[i] = src[static_cast<int64_t>(i) * oc_] + bias;
      }
    if (keep) cols_ = std::move(cols);
    batch_ = B;
    return y;
  }

  Tensor<T> backward(const Tensor<T>& g) {
    const int B = batch_;
    require_shape(g.rank() == 4 && g.dim(0) == B && g.dim(1) == oc_ && g.dim(2) == oh_ &&
                      g.dim(3) == ow_,
                  "conv layer '" + name_ + "': upstream gradient shape mismatch");
    const int rows = B * oh_ * ow_;
    const int hw = oh_ * ow_;
    Tensor<T> gmat({rows, oc_});
    for (int s = 0; s < B; ++s)
      for (int c = 0; c < oc_; ++c) {
        const T* src = g.data() + (static_cast<int64_t>(s) * oc_ + c) * hw;
        T* dst = gmat.data() + static_cast<int64_t>(s) * hw * oc_ + c;
        for (int i = 0; i < hw; ++i) dst[static_cast<int64_t>(i) * oc_] = src[i];
      }
    gemm_tn_acc(gmat.data(), cols_.data(), W_->grad.data(), rows, oc_, ic_ * 9);
    colsum_acc(gmat.data(), b_->grad.data(), rows, oc_);
    Tensor<T> gcols({rows, ic_ * 9});
    gemm_nn(gmat.data(), W_->value.data(), gcols.data(), rows, oc_, ic_ * 9);
    Tensor<T> gx({B, ic_, ih_, iw_});
    col2im(gcols, gx);
    return gx;
  }

 private:
  void im2col(const Tensor<T>& x, Tensor<T>& cols) const {
    const int B = x.dim(0);
    int64_t row = 0;
    for (int s = 0; s < B; ++s) {
      const T* xs = x.data() + static_cast<int64_t>(s) * ic_ * ih_ * iw_;
      for (int oy = 0; oy < oh_; ++oy)
        for (int ox = 0; ox < ow_; ++ox, ++row) {
          T* dst = cols.data() + row * ic_ * 9;
          for (int c = 0; c < ic_; ++c) {
            const T* xc = xs + static_cast<int64_t>(c) * ih_ * iw_;
            for (int ky = 0; ky < 3; ++ky) {
              const int iy = oy * 2 - 1 + ky;
              for (int kx = 0; kx < 3; ++kx) {
                const int ix = ox * 2 - 1 + kx;
                *dst++ = (iy >= 0 && iy < ih_ && ix >= 0 && ix < iw_)
                             ? xc[static_cast<int64_t>(iy) * iw_ + ix]
                             : T(0);
              }
            }
          }
        }
    }
  }

  void col2im(const Tensor<T>& gcols, Tensor<T>& gx) const {
    const int B = gx.dim(0);
    int64_t row = 0;
    for (int s = 0; s < B; ++s) {
      T* xs = gx.data() + static_cast<int64_t>(s) * ic_ * ih_ * iw_;
      for (int oy = 0; oy < oh_; ++oy)
        for (int ox = 0; ox < ow_; ++ox, ++row) {
          const T* src = gcols.data() + row * ic_ * 9;
          for (int c = 0; c < ic_; ++c) {
            T* xc = xs + static_cast<int64_t>(c) * ih_ * iw_;
            for (int ky = 0; ky < 3; ++ky) {
              const int iy = oy * 2 - 1 + ky;
              for (int kx = 0; kx < 3; ++kx) {
                const int ix = ox * 2 - 1 + kx;
                if (iy >= 0 && iy < ih_ && ix >= 0 && ix < iw_)
                  xc[static_cast<int64_t>(iy) * iw_ + ix] += *src;
                ++src;
              }
            }
          }
        }
    }
  }

  std::string name_;
  int ic_ = 0, oc_ = 0, ih_ = 0, iw_ = 0, oh_ = 0, ow_ = 0;
  Parameter<T>* W_ = nullptr;
  Parameter<T>* b_ = nullptr;
  Tensor<T> cols_;
  int batch_ = 0;
};

// Dense stack with ReLU between layers and optional ReLU on the output.
template <class T>
class Mlp {
 public:
  Mlp() = default;
  Mlp(ParamStore<T>& store, const std::string& name, int in, const std::vector<int>& widths,
      int out, bool relu_out)
      : relu_out_(relu_out) {
    int prev = in;
    int idx = 0;
    for (int w : widths) {
      layers_.emplace_back(store, name + ".fc" + std::to_string(idx++), prev, w);
      prev = w;
    }
    layers_.emplace_back(store, name + ".fc" + std::to_string(idx), prev, out);
    relus_.resize(layers_.size());
  }

  Tensor<T> forward(const Tensor<T>& x, bool keep) {
    Tensor<T> h = x;
    for (size_t i = 0; i < layers_.size(); ++i) {
      h = layers_[i].forward(h, keep);
      if (i + 1 < layers_.size() || relu_out_) h = relus_[i].forward(h, keep);
    }
    return h;
  }

  Tensor<T> backward(const Tensor<T>& g) {
    Tensor<T> gh = g;
    for (size_t i = layers_.size(); i-- > 0;) {
      if (i + 1 < layers_.size() || relu_out_) gh = relus_[i].backward(gh);
      gh = layers_[i].backward(gh);
    }
    return gh;
  }

 private:
  std::vector<DenseLayer<T>> layers_;
  std::vector<ReluLayer<T>> relus_;
  bool relu_out_ = false;
};

// ---------------------------------------------------------------------------
// NetworkSpec: declarative description of the observation encoders and head.
// ---------------------------------------------------------------------------

enum class EncoderKind { ConvStack, FlattenMlp };
enum class ActivationKind { Relu };

inline double activation_at_zero(ActivationKind) { return 0.0; }

struct NetworkSpec {
  // observation geometry
  int bev_channels = 5;
  int bev_h = 64;
  int bev_w = 64;
  int state_dim = 3;
  // encoder
  EncoderKind encoder = EncoderKind::ConvStack;
  std::vector<int> conv_channels = {8, 16, 32};  // stride-2 3x3 per entry
  std::vector<int> flat_widths = {256, 256};     // FlattenMlp hidden widths
  int embed_dim = 256;                           // per-branch embedding width
  std::vector<int> state_widths = {256, 256};
  // head (energy fusion or beta head)
  std::vector<int> head_widths = {256, 128};
  int head_out = 1;
  ActivationKind activation = ActivationKind::Relu;

  void validate() const {
    require(bev_channels > 0 && bev_h > 0 && bev_w > 0 && state_dim > 0,
            "NetworkSpec: observation dims must be positive");
    require(embed_dim > 0 && head_out > 0, "NetworkSpec: widths must be positive");
    for (int w : conv_channels) require(w > 0, "NetworkSpec: conv channel must be positive");
    for (int w : flat_widths) require(w > 0, "NetworkSpec: width must be positive");
    for (int w : state_widths) require(w > 0, "NetworkSpec: width must be positive");
    for (int w : head_widths) require(w > 0, "NetworkSpec: width must be positive");
  }
};

// BEV branch: conv-stack (or flatten-MLP) down to a flat embedding.
template <class T>
class ObsEncoder {
 public:
  ObsEncoder() = default;
  ObsEncoder(ParamStore<T>& store, const std::string& name, const NetworkSpec& spec)
      : kind_(spec.encoder), c_(spec.bev_channels), h_(spec.bev_h), w_(spec.bev_w) {
    if (kind_ == EncoderKind::ConvStack) {
      int ic = spec.bev_channels, ih = spec.bev_h, iw = spec.bev_w;
      int idx = 0;
      for (int oc : spec.conv_channels) {
        convs_.emplace_back(store, name + ".conv" + std::to_string(idx++), ic, oc, ih, iw);
        ic = oc;
        ih = convs_.back().out_h();
        iw = convs_.back().out_w();
      }
      conv_relus_.resize(convs_.size());
      flat_dim_ = ic * ih * iw;
      proj_ = Mlp<T>(store, name + ".proj", flat_dim_, {}, spec.embed_dim, true);
    } else {
      flat_dim_ = spec.bev_channels * spec.bev_h * spec.bev_w;
      proj_ = Mlp<T>(store, name + ".mlp", flat_dim_, spec.flat_widths, spec.embed_dim, true);
    }
  }

  // bev: [B, C, H, W] -> [B, embed]
  Tensor<T> forward(const Tensor<T>& bev, bool keep) {
    require_shape(bev.rank() == 4 && bev.dim(1) == c_ && bev.dim(2) == h_ && bev.dim(3) == w_,
                  "obs encoder: BEV shape " + shape_str(bev.shape()) + " does not match spec");
    Tensor<T> h = bev;
    if (kind_ == EncoderKind::ConvStack) {
      for (size_t i = 0; i < convs_.size(); ++i) {
        h = convs_[i].forward(h, keep);
        h = conv_relus_[i].forward(h, keep);
      }
    }
    Tensor<T> flat = Tensor<T>::from({h.dim(0), static_cast<int>(h.numel() / h.dim(0))},
                                     std::vector<T>(h.data(), h.data() + h.numel()));
    last_conv_shape_ = h.shape();
    return proj_.forward(flat, keep);
  }

  Tensor<T> backward(const Tensor<T>& g) {
    Tensor<T> gflat = proj_.backward(g);
    if (kind_ != EncoderKind::ConvStack) return gflat;
    Tensor<T> gh = Tensor<T>::from(last_conv_shape_,
                                   std::vector<T>(gflat.data(), gflat.data() + gflat.numel()));
    for (size_t i = convs_.size(); i-- > 0;) {
      gh = conv_relus_[i].backward(gh);
      gh = convs_[i].backward(gh);
    }
    return gh;
  }

 private:
  EncoderKind kind_ = EncoderKind::ConvStack;
  int c_ = 0, h_ = 0, w_ = 0;
  std::vector<Conv2dLayer<T>> convs_;
  std::vector<ReluLayer<T>> conv_relus_;
  int flat_dim_ = 0;
  Mlp<T> proj_;
  std::vector<int> last_conv_shape_;
};

}  // namespace daibc::nn
