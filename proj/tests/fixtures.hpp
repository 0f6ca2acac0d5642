// Copyright 2026 The Sentinel Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <unistd.h>

#include "sentinel/dataset.hpp"
#include "sentinel/random.hpp"

namespace sentinel::testing {

inline Observation make_obs(std::vector<double> coords, std::vector<double> hostility) {
  Observation obs;
  for (std::size_t i = 0; i + 1 < coords.size(); i += 2) {
    obs.locations.push_back({coords[i], coords[i + 1]});
  }
  obs.hostility = std::move(hostility);
  return obs;
}

/// Two logged episodes of three objects: location tables I/II paired with
/// hostility tables III/IV of the reference example.
inline RawDataset reference_tables() {
  RawDataset ds;
  ds.n_objects = 3;
  ds.meta.bounds = {0, 0, 1000, 1000};
  ds.groups.push_back({
      make_obs({234, 874, 214, 856, 764, 214}, {0, 0, 1}),
      make_obs({45, 698, 102, 523, 154, 601}, {0, 1, 0}),
      make_obs({487, 35, 924, 157, 245, 682}, {0, 0, 1}),
      make_obs({147, 256, 651, 654, 213, 746}, {1, 0, 1}),
  });
  ds.groups.push_back({
      make_obs({568, 248, 278, 698, 421, 297}, {1, 0, 0}),
      make_obs({354, 14, 685, 32, 682, 413}, {1, 0, 0}),
      make_obs({570, 694, 724, 31, 824, 246}, {0, 0, 1}),
  });
  return ds;
}

/// Random raw dataset with 0/1 labels; coordinates on a coarse grid so
/// duplicates across objects occur.
inline RawDataset random_raw(Rng& rng, std::size_t n, std::size_t k_max, std::size_t m_max) {
  RawDataset ds;
  ds.n_objects = n;
  ds.meta.bounds = {0, 0, 100, 100};
  const std::size_t k = 1 + rng.below(k_max);
  for (std::size_t g = 0; g < k; ++g) {
    Group group;
    const std::size_t m = 1 + rng.below(m_max);
    for (std::size_t u = 0; u < m; ++u) {
      Observation obs;
      for (std::size_t v = 0; v < n; ++v) {
        obs.locations.push_back({static_cast<double>(rng.below(101)),
                                 static_cast<double>(rng.below(101))});
        obs.hostility.push_back(static_cast<double>(rng.below(2)));
      }
      group.push_back(std::move(obs));
    }
    ds.groups.push_back(std::move(group));
  }
  return ds;
}

/// Canonical multiset key for one observation.
inline std::vector<double> flat_key(const Observation& obs) {
  std::vector<double> key;
  for (std::size_t v = 0; v < obs.size(); ++v) {
    key.push_back(obs.locations[v].x);
    key.push_back(obs.locations[v].y);
    key.push_back(obs.hostility[v]);
  }
  return key;
}

inline std::vector<std::vector<double>> sorted_keys(const Group& g) {
  std::vector<std::vector<double>> keys;
  for (const auto& obs : g) keys.push_back(flat_key(obs));
  std::sort(keys.begin(), keys.end());
  return keys;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("sentinel-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace sentinel::testing
