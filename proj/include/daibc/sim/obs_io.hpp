#pragma once

#include <filesystem>

#include "daibc/blobfile.hpp"
#include "daibc/sim/bev.hpp"

namespace daibc::sim {

// Single-observation container used by the landscape command fixtures.
inline void save_observation(const std::filesystem::path& path, const Observation& obs) {
  ordered_json h;
  h["format"] = "daibc-obs-v1";
  h["bev_shape"] = obs.bev.shape();
  h["state_dim"] = 3;
  std::vector<float> payload(obs.bev.data(), obs.bev.data() + obs.bev.numel());
  payload.insert(payload.end(), obs.state.begin(), obs.state.end());
  write_blob(path, h, payload);
}

inline Observation load_observation(const std::filesystem::path& path) {
  Blob blob = read_blob(path);
  require(blob.header.value("format", "") == "daibc-obs-v1",
          "observation file: unknown format in " + path.string());
  const auto shape = blob.header.at("bev_shape").get<std::vector<int>>();
  require(shape.size() == 3 && shape[0] == kBevChannels, "observation file: bad BEV shape");
  Observation obs;
  const int64_t n = static_cast<int64_t>(shape[0]) * shape[1] * shape[2];
  require(static_cast<int64_t>(blob.payload.size()) == n + 3,
          "observation file: payload size mismatch");
  obs.bev = Tensor<float>::from(shape,
                                std::vector<float>(blob.payload.begin(), blob.payload.begin() + n));
  for (int i = 0; i < 3; ++i) obs.state[static_cast<size_t>(i)] = blob.payload[static_cast<size_t>(n + i)];
  return obs;
}

}  // namespace daibc::sim
