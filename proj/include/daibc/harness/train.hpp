#pragma once

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "daibc/harness/agents.hpp"

namespace daibc::harness {

enum class Method { Bc, Ibc, DaIbc };

inline std::string method_name(Method m) {
  switch (m) {
    case Method::Bc: return "bc";
    case Method::Ibc: return "ibc";
    default: return "da-ibc";
  }
}

inline Method method_from_name(const std::string& s) {
  if (s == "bc") return Method::Bc;
  if (s == "ibc") return Method::Ibc;
  if (s == "da-ibc" || s == "daibc") return Method::DaIbc;
  throw InputError("unknown method '" + s + "' (expected bc, ibc, da-ibc)");
}

struct TrainConfig {
  Method method = Method::DaIbc;
  int epochs = 50;          // desk-scale default; paper trains up to 400
  int batch = 128;
  double lr = 1e-5;
  uint64_t seed = 1;
  double kde_bandwidth = 0.2;
  density::WeightClamp clamp;
  bool weighted_sampling = true;  // minibatch frequencies carry the weights
  bool weighted_loss = false;     // direct w_i factors in the loss instead
  double grad_clip = 0.0;         // global L2 clip; 0 disables
  ebm::EbmTrainConfig ebm;
  nn::NetworkSpec net;  // observation geometry is overwritten from the dataset
  bool keep_epoch_checkpoints = false;
  uint64_t config_hash = 0;  // echoed into every metric row

  void validate() const {
    require(epochs >= 1 && batch >= 1, "train config: epochs and batch must be >= 1");
    require(lr >= 0.0, "train config: negative learning rate");
    ebm.validate();
  }
};

struct TrainResult {
  std::filesystem::path checkpoint;
  double final_loss = 0.0;
  double first_loss = 0.0;
  int iterations = 0;
};

namespace detail {

inline void gather_batch(const sim::Dataset& ds, std::span<const int> idx, Tensor<float>& bev,
                         Tensor<float>& state, std::vector<Action>& acts) {
  const int B = static_cast<int>(idx.size());
  bev = Tensor<float>({B, sim::kBevChannels, ds.bev.h, ds.bev.w});
  state = Tensor<float>({B, ds.state_dim});
  acts.resize(static_cast<size_t>(B));
  const int64_t bn = ds.bev_numel();
  for (int i = 0; i < B; ++i) {
    const int64_t r = idx[static_cast<size_t>(i)];
    auto brow = ds.bev_row(r);
    std::copy(brow.begin(), brow.end(), bev.data() + static_cast<int64_t>(i) * bn);
    auto srow = ds.state_row(r);
    std::copy(srow.begin(), srow.end(), state.data() + static_cast<int64_t>(i) * ds.state_dim);
    acts[static_cast<size_t>(i)] = ds.actions[static_cast<size_t>(r)];
  }
}

inline std::vector<int> uniform_minibatch(int64_t count, int n, Rng& rng) {
  std::vector<int> idx(static_cast<size_t>(n));
  for (int& i : idx) i = rng.below(static_cast<int>(count));
  return idx;
}

}  // namespace detail

// Shared training loop: weighted minibatch draw, method loss, ADAM step,
// JSONL loss log, checkpoint per epoch. Deterministic for a fixed seed.
inline TrainResult train(const sim::Dataset& ds, TrainConfig cfg,
                         const std::filesystem::path& out_dir) {
  cfg.validate();
  require(ds.count >= 1, "train: empty dataset");
  std::filesystem::create_directories(out_dir);

  cfg.net.bev_channels = sim::kBevChannels;
  cfg.net.bev_h = ds.bev.h;
  cfg.net.bev_w = ds.bev.w;
  cfg.net.state_dim = ds.state_dim;
  cfg.net.validate();

  auto kde = density::kde_fit(ds.actions, cfg.kde_bandwidth);
  auto weights = density::inverse_density_weights(kde, ds.actions, cfg.clamp);
  density::write_weights_csv(out_dir / "weights.csv", kde, ds.actions, weights);

  std::unique_ptr<beta::BetaPolicyNet<float>> beta_net;
  std::unique_ptr<ebm::EnergyNet<float>> ebm_net;
  nn::ParamStore<float>* store = nullptr;
  if (cfg.method == Method::Bc) {
    auto spec = cfg.net;
    spec.head_out = 4;
    beta_net = std::make_unique<beta::BetaPolicyNet<float>>(spec, cfg.seed);
    store = &beta_net->store();
  } else {
    auto spec = cfg.net;
    spec.head_out = 1;
    ebm_net = std::make_unique<ebm::EnergyNet<float>>(spec, cfg.seed);
    store = &ebm_net->store();
  }

  const ebm::NegSampler sampler =
      cfg.method == Method::Ibc ? ebm::NegSampler::Uniform : ebm::NegSampler::ExpertPerturbed;
  auto ebm_cfg = cfg.ebm;
  ebm_cfg.sampler = sampler;

  const int iters_per_epoch =
      static_cast<int>((ds.count + cfg.batch - 1) / static_cast<int64_t>(cfg.batch));
  const auto log_path = out_dir / "loss.jsonl";
  std::FILE* log = std::fopen(log_path.string().c_str(), "wb");
  require(log != nullptr, "train: cannot open " + log_path.string());

  Rng master(cfg.seed);
  Rng sample_rng = master.derive(0x5A17);
  Rng neg_rng = master.derive(0x9E6);

  const auto ckpt_path = out_dir / "checkpoint.bin";
  const std::string policy_kind = cfg.method == Method::Bc ? "beta" : "ebm";
  const auto& spec = cfg.method == Method::Bc ? beta_net->spec() : ebm_net->spec();

  TrainResult result;
  Tensor<float> bev, state;
  std::vector<Action> acts;
  int iter = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (int k = 0; k < iters_per_epoch; ++k, ++iter) {
      const auto idx = cfg.weighted_sampling
                           ? density::weighted_minibatch(weights, cfg.batch, sample_rng)
                           : detail::uniform_minibatch(ds.count, cfg.batch, sample_rng);
      detail::gather_batch(ds, idx, bev, state, acts);
      std::vector<double> w;
      if (cfg.weighted_loss) {
        w.resize(idx.size());
        for (size_t i = 0; i < idx.size(); ++i)
          w[i] = weights.weights[static_cast<size_t>(idx[i])];
      }

      store->zero_grad();
      double loss = 0.0;
      std::string sampler_name = "none";
      try {
        if (cfg.method == Method::Bc) {
          loss = beta_net->loss_and_grad(bev, state, acts, w);
          sampler_name = "beta-nll";
        } else {
          ebm::NegativeSet negs;
          if (sampler == ebm::NegSampler::Uniform) {
            negs = ebm::sample_negatives_uniform(cfg.batch, ebm_cfg, neg_rng);
          } else {
            // independent uniform-random expert minibatch feeds the sampler
            const auto pool_idx = detail::uniform_minibatch(ds.count, cfg.batch, neg_rng);
            std::vector<Action> pool(pool_idx.size());
            for (size_t i = 0; i < pool_idx.size(); ++i)
              pool[i] = ds.actions[static_cast<size_t>(pool_idx[i])];
            negs = ebm::sample_negatives_da(pool, cfg.batch, ebm_cfg, neg_rng);
          }
          loss = ebm_net->loss_and_grad(bev, state, acts, negs, w).loss;
          sampler_name = ebm::neg_sampler_name(sampler);
        }
        if (cfg.grad_clip > 0.0) nn::clip_grad_norm(*store, cfg.grad_clip);
        nn::adam_step(*store, {.lr = cfg.lr});
      } catch (const NumericError& e) {
        ordered_json dump;
        dump["error"] = e.what();
        dump["iter"] = iter;
        dump["epoch"] = epoch;
        dump["method"] = method_name(cfg.method);
        dump["batch_indices"] = std::vector<int>(idx.begin(), idx.end());
        write_text_file(out_dir / "numeric_failure.json", dump.dump(2) + "\n");
        std::fclose(log);
        throw;
      }

      ordered_json row;
      row["iter"] = iter;
      row["epoch"] = epoch;
      row["loss"] = loss;
      row["sampler"] = sampler_name;
      row["sigma_neg"] = cfg.method == Method::Bc ? 0.0 : ebm_cfg.sigma_neg;
      row["n_neg"] = cfg.method == Method::Bc ? 0 : ebm_cfg.n_neg;
      row["seed"] = cfg.seed;
      row["config_hash"] = hex64(cfg.config_hash);
      const std::string line = row.dump() + "\n";
      std::fwrite(line.data(), 1, line.size(), log);

      if (iter == 0) result.first_loss = loss;
      result.final_loss = loss;
    }
    ordered_json meta;
    meta["method"] = method_name(cfg.method);
    if (cfg.keep_epoch_checkpoints) {
      char name[64];
      std::snprintf(name, sizeof(name), "checkpoint_epoch_%04d.bin", epoch);
      nn::save_checkpoint(out_dir / name, *store, spec, policy_kind, cfg.seed, meta);
    }
    nn::save_checkpoint(ckpt_path, *store, spec, policy_kind, cfg.seed, meta);
  }
  std::fclose(log);
  result.checkpoint = ckpt_path;
  result.iterations = iter;
  return result;
}

}  // namespace daibc::harness
