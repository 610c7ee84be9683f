#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "daibc/blobfile.hpp"
#include "daibc/nn.hpp"

namespace daibc::nn {

inline std::string encoder_kind_name(EncoderKind k) {
  return k == EncoderKind::ConvStack ? "conv-stack" : "flatten-mlp";
}

inline EncoderKind encoder_kind_from_name(const std::string& s) {
  if (s == "conv-stack") return EncoderKind::ConvStack;
  if (s == "flatten-mlp") return EncoderKind::FlattenMlp;
  throw InputError("unknown encoder kind: " + s);
}

inline ordered_json spec_to_json(const NetworkSpec& s) {
  ordered_json j;
  j["encoder"] = encoder_kind_name(s.encoder);
  j["bev_channels"] = s.bev_channels;
  j["bev_h"] = s.bev_h;
  j["bev_w"] = s.bev_w;
  j["state_dim"] = s.state_dim;
  j["conv_channels"] = s.conv_channels;
  j["flat_widths"] = s.flat_widths;
  j["embed_dim"] = s.embed_dim;
  j["state_widths"] = s.state_widths;
  j["head_widths"] = s.head_widths;
  j["head_out"] = s.head_out;
  j["activation"] = "relu";
  return j;
}

inline NetworkSpec spec_from_json(const ordered_json& j) {
  NetworkSpec s;
  s.encoder = encoder_kind_from_name(j.at("encoder").get<std::string>());
  s.bev_channels = j.at("bev_channels").get<int>();
  s.bev_h = j.at("bev_h").get<int>();
  s.bev_w = j.at("bev_w").get<int>();
  s.state_dim = j.at("state_dim").get<int>();
  s.conv_channels = j.at("conv_channels").get<std::vector<int>>();
  s.flat_widths = j.at("flat_widths").get<std::vector<int>>();
  s.embed_dim = j.at("embed_dim").get<int>();
  s.state_widths = j.at("state_widths").get<std::vector<int>>();
  s.head_widths = j.at("head_widths").get<std::vector<int>>();
  s.head_out = j.at("head_out").get<int>();
  s.validate();
  return s;
}

// Checkpoint layout: blob header carries the network spec, policy kind, seed
// and ADAM step count; the payload is every parameter flattened in
// declaration order as little-endian float32.
template <class T>
void save_checkpoint(const std::filesystem::path& path, const ParamStore<T>& store,
                     const NetworkSpec& spec, const std::string& policy_kind, uint64_t seed,
                     const ordered_json& meta = ordered_json::object()) {
  ordered_json h;
  h["format"] = "daibc-checkpoint-v1";
  h["policy_kind"] = policy_kind;
  h["seed"] = seed;
  h["adam_step_count"] = store.adam_step_count;
  h["meta"] = meta;
  h["spec"] = spec_to_json(spec);
  ordered_json params = ordered_json::array();
  size_t total = 0;
  for (const auto& p : store.params()) {
    ordered_json pj;
    pj["name"] = p->name;
    pj["shape"] = p->value.shape();
    params.push_back(pj);
    total += static_cast<size_t>(p->value.numel());
  }
  h["params"] = params;
  std::vector<float> payload;
  payload.reserve(total * 3);
  auto append = [&payload](const Tensor<T>& t) {
    for (int64_t i = 0; i < t.numel(); ++i) payload.push_back(static_cast<float>(t[i]));
  };
  for (const auto& p : store.params()) append(p->value);
  // ADAM moments follow the values so training can resume exactly
  for (const auto& p : store.params()) append(p->m);
  for (const auto& p : store.params()) append(p->v);
  write_blob(path, h, payload);
}

struct CheckpointInfo {
  NetworkSpec spec;
  std::string policy_kind;
  uint64_t seed = 0;
  int64_t adam_step_count = 0;
  ordered_json meta = ordered_json::object();
};

inline CheckpointInfo peek_checkpoint(const std::filesystem::path& path) {
  Blob blob = read_blob(path);
  CheckpointInfo info;
  info.spec = spec_from_json(blob.header.at("spec"));
  info.policy_kind = blob.header.at("policy_kind").get<std::string>();
  info.seed = blob.header.at("seed").get<uint64_t>();
  info.adam_step_count = blob.header.at("adam_step_count").get<int64_t>();
  if (blob.header.contains("meta")) info.meta = blob.header.at("meta");
  return info;
}

// Loads parameter values (and moments) into an already-built store; the store
// must declare identical names and shapes in identical order.
template <class T>
CheckpointInfo load_checkpoint(const std::filesystem::path& path, ParamStore<T>& store) {
  Blob blob = read_blob(path);
  CheckpointInfo info;
  info.spec = spec_from_json(blob.header.at("spec"));
  info.policy_kind = blob.header.at("policy_kind").get<std::string>();
  info.seed = blob.header.at("seed").get<uint64_t>();
  info.adam_step_count = blob.header.at("adam_step_count").get<int64_t>();
  if (blob.header.contains("meta")) info.meta = blob.header.at("meta");

  const auto& params = blob.header.at("params");
  require(params.size() == store.params().size(),
          "checkpoint: parameter count mismatch in " + path.string());
  size_t total = 0;
  for (size_t i = 0; i < store.params().size(); ++i) {
    const auto& p = store.params()[i];
    require(params[i].at("name").get<std::string>() == p->name,
            "checkpoint: parameter name mismatch at index " + std::to_string(i));
    require(params[i].at("shape").get<std::vector<int>>() == p->value.shape(),
            "checkpoint: parameter shape mismatch for " + p->name);
    total += static_cast<size_t>(p->value.numel());
  }
  require(blob.payload.size() == total * 3, "checkpoint: payload size mismatch");
  size_t off = 0;
  auto take = [&blob, &off](Tensor<T>& t) {
    for (int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<T>(blob.payload[off++]);
  };
  for (auto& p : store.params()) take(p->value);
  for (auto& p : store.params()) take(p->m);
  for (auto& p : store.params()) take(p->v);
  store.adam_step_count = info.adam_step_count;
  return info;
}

}  // namespace daibc::nn
