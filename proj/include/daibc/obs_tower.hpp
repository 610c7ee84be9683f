#pragma once

#include "daibc/nn.hpp"

namespace daibc::nn {

// Shared observation trunk: BEV encoder and state MLP, each producing an
// embed_dim vector, concatenated to [B, 2*embed_dim]. Both the energy model
// and the Beta policy sit on top of this.
template <class T>
class ObsTower {
 public:
  ObsTower() = default;
  ObsTower(ParamStore<T>& store, const NetworkSpec& spec)
      : embed_(spec.embed_dim),
        bev_enc_(store, "bev", spec),
        state_enc_(store, "state", spec.state_dim, spec.state_widths, spec.embed_dim, true) {}

  int out_dim() const { return 2 * embed_; }

  // bev [B,C,H,W], state [B,state_dim] -> [B, 2*embed]
  Tensor<T> forward(const Tensor<T>& bev, const Tensor<T>& state, bool keep) {
    Tensor<T> be = bev_enc_.forward(bev, keep);
    Tensor<T> se = state_enc_.forward(state, keep);
    const int B = be.dim(0);
    Tensor<T> out({B, 2 * embed_});
    for (int r = 0; r < B; ++r) {
      T* dst = out.data() + static_cast<int64_t>(r) * 2 * embed_;
      const T* b = be.data() + static_cast<int64_t>(r) * embed_;
      const T* s = se.data() + static_cast<int64_t>(r) * embed_;
      for (int i = 0; i < embed_; ++i) dst[i] = b[i];
      for (int i = 0; i < embed_; ++i) dst[embed_ + i] = s[i];
    }
    return out;
  }

  void backward(const Tensor<T>& g) {
    const int B = g.dim(0);
    Tensor<T> gb({B, embed_}), gs({B, embed_});
    for (int r = 0; r < B; ++r) {
      const T* src = g.data() + static_cast<int64_t>(r) * 2 * embed_;
      T* b = gb.data() + static_cast<int64_t>(r) * embed_;
      T* s = gs.data() + static_cast<int64_t>(r) * embed_;
      for (int i = 0; i < embed_; ++i) b[i] = src[i];
      for (int i = 0; i < embed_; ++i) s[i] = src[embed_ + i];
    }
    bev_enc_.backward(gb);
    state_enc_.backward(gs);
  }

 private:
  int embed_ = 0;
  ObsEncoder<T> bev_enc_;
  Mlp<T> state_enc_;
};

}  // namespace daibc::nn
