// Copyright 2026 The Sentinel Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <vector>

#include "sentinel/dataset.hpp"
#include "sentinel/mlp.hpp"

namespace sentinel {

/// How a model was produced; enough to reproduce or continue its training.
struct TrainingProvenance {
  std::string dataset_id;
  PermutationPolicy policy = FullExpansion{};
  std::uint64_t split_seed = 0;
  TrainConfig train_config;
  std::size_t stop_epoch = 0;
  std::size_t best_epoch = 0;
  double best_validation_mse = 0.0;

  friend bool operator==(const TrainingProvenance&, const TrainingProvenance&) = default;
};

/// One published model for a fixed object count.
struct ModelRecord {
  std::size_t n_objects = 0;
  Network network;
  /// Area bounds the network's inputs are scaled by. Always `scale == none`:
  /// callers pass area coordinates.
  DatasetMeta meta;
  std::uint64_t version = 1;
  TrainingProvenance provenance;

  void validate() const;

  friend bool operator==(const ModelRecord&, const ModelRecord&) = default;
};

void write_model_record(const ModelRecord& record, std::ostream& out);
ModelRecord read_model_record(std::istream& in, const std::string& source = "<stream>");
ModelRecord read_model_record(const std::filesystem::path& path);

struct TrainOptions {
  std::size_t hidden_size = 0;  // 0 selects 2N
  std::uint64_t init_seed = 0;
  std::uint64_t split_seed = 0;
  PermutationPolicy policy = FullExpansion{};
  TrainConfig train_config;
};

/// Normalizes, splits and trains a fresh network on `raw`. The returned
/// record has version 1.
ModelRecord train_model(const RawDataset& raw, const TrainOptions& options);

struct RetrainOptions {
  /// Start from freshly initialized weights instead of the current model.
  bool full_retrain = false;
};

/// Models keyed by object count, persisted as
/// `<root>/n<N>/v<version>.model` plus `<root>/n<N>/dataset.raw`.
///
/// `select` may be called from any thread while a retrain is running; the
/// new record becomes visible in one atomic swap. Retrains for the same N
/// are serialized. A bank with an empty root lives only in memory.
class NetworkBank {
 public:
  NetworkBank() = default;
  explicit NetworkBank(std::filesystem::path root);

  NetworkBank(const NetworkBank&) = delete;
  NetworkBank& operator=(const NetworkBank&) = delete;

  /// Reads every record under `root`, keeping the highest version per N.
  /// A missing or empty root yields an empty bank.
  static std::unique_ptr<NetworkBank> load(const std::filesystem::path& root);

  const std::filesystem::path& root() const noexcept { return root_; }

  /// The model serving N objects. Throws MissingModel.
  std::shared_ptr<const ModelRecord> select(std::size_t n_objects) const;

  bool contains(std::size_t n_objects) const;
  std::vector<std::size_t> object_counts() const;

  /// Raw training data stored alongside the model for N, if any.
  std::shared_ptr<const RawDataset> dataset(std::size_t n_objects) const;

  /// Registers `record` as the current model for its N, together with the
  /// raw dataset it was trained on. The version must exceed the current one.
  void publish(ModelRecord record, RawDataset dataset);

  /// Appends `event_records` as a new dataset group, retrains (warm-started
  /// from the current weights unless `full_retrain`), and publishes the
  /// result as version + 1. On failure the current model stays in place.
  std::shared_ptr<const ModelRecord> retrain_from_event(std::size_t n_objects,
                                                        const std::vector<Observation>& event_records,
                                                        const RetrainOptions& options = {});

  /// Writes any record or dataset not yet on disk. Existing version files are
  /// never rewritten.
  void save() const;

 private:
  struct Entry {
    std::shared_ptr<const ModelRecord> record;
    std::shared_ptr<const RawDataset> dataset;
  };

  void persist(const Entry& entry) const;
  std::mutex& retrain_mutex(std::size_t n_objects);

  std::filesystem::path root_;
  mutable std::shared_mutex mu_;
  std::map<std::size_t, Entry> entries_;
  std::mutex retrain_map_mu_;
  std::map<std::size_t, std::unique_ptr<std::mutex>> retrain_mu_;
};

}  // namespace sentinel
