#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "daibc/blobfile.hpp"

namespace daibc::cli {

// Flat key/value run configuration: declared defaults, overlaid by a JSON
// config file, overlaid by explicit CLI values. Unknown keys are rejected.
// Path-valued keys are excluded from the semantic hash so reruns in a
// different directory reproduce the same artifacts byte for byte.
class RunConfig {
 public:
  void declare(const std::string& key, ordered_json def, bool is_path = false) {
    require(values_.find(key) == values_.end(), "config: duplicate key " + key);
    values_[key] = std::move(def);
    order_.push_back(key);
    if (is_path) path_keys_.push_back(key);
  }

  bool known(const std::string& key) const { return values_.find(key) != values_.end(); }

  void set(const std::string& key, ordered_json v) {
    auto it = values_.find(key);
    require(it != values_.end(), "config: unknown key '" + key + "'");
    it->second = std::move(v);
  }

  void load_file(const std::filesystem::path& path) {
    ordered_json j;
    try {
      j = ordered_json::parse(read_text_file(path));
    } catch (const ordered_json::parse_error& e) {
      throw InputError("config: invalid JSON in " + path.string() + ": " + e.what());
    }
    require(j.is_object(), "config: top level must be an object in " + path.string());
    for (const auto& [key, value] : j.items()) {
      if (key == "config_hash") continue;  // stamped into echoes; not a setting
      set(key, value);
    }
  }

  const ordered_json& get(const std::string& key) const {
    auto it = values_.find(key);
    require(it != values_.end(), "config: unknown key '" + key + "'");
    return it->second;
  }

  std::string get_str(const std::string& key) const { return get(key).get<std::string>(); }
  int get_int(const std::string& key) const { return get(key).get<int>(); }
  uint64_t get_u64(const std::string& key) const { return get(key).get<uint64_t>(); }
  double get_double(const std::string& key) const { return get(key).get<double>(); }
  bool get_bool(const std::string& key) const { return get(key).get<bool>(); }

  ordered_json resolved() const {
    ordered_json j;
    for (const auto& k : order_) j[k] = values_.at(k);
    return j;
  }

  // FNV-1a over the resolved non-path entries, sorted by key.
  uint64_t semantic_hash() const {
    std::vector<std::string> keys = order_;
    std::sort(keys.begin(), keys.end());
    uint64_t h = 0xcbf29ce484222325ull;
    for (const auto& k : keys) {
      if (std::find(path_keys_.begin(), path_keys_.end(), k) != path_keys_.end()) continue;
      const std::string entry = k + "=" + values_.at(k).dump();
      h = fnv1a64(entry.data(), entry.size(), h);
    }
    return h;
  }

  // Resolved-config echo: written next to the run's artifacts.
  void write_resolved(const std::filesystem::path& path) const {
    ordered_json j = resolved();
    j["config_hash"] = hex64(semantic_hash());
    write_text_file(path, j.dump(2) + "\n");
  }

 private:
  std::map<std::string, ordered_json> values_;
  std::vector<std::string> order_;
  std::vector<std::string> path_keys_;
};

}  // namespace daibc::cli
