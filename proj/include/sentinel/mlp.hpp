// Copyright 2026 The Sentinel Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sentinel/dataset.hpp"

namespace sentinel {

/// Shape of the network for N objects: 2N inputs (x, y per object), one
/// hidden layer, N outputs (hostility per object).
struct NetworkConfig {
  std::size_t n_objects = 0;
  std::size_t input_size = 0;
  std::size_t hidden_size = 0;
  std::size_t output_size = 0;
  std::uint64_t seed = 0;

  /// `hidden_size == 0` selects the default of 2N.
  static NetworkConfig for_objects(std::size_t n_objects, std::size_t hidden_size = 0,
                                   std::uint64_t seed = 0);

  void validate() const;

  friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

/// Dense row-major matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

struct Network {
  NetworkConfig config;
  Matrix hidden_weights;  // hidden_size x input_size
  std::vector<double> hidden_bias;
  Matrix output_weights;  // output_size x hidden_size
  std::vector<double> output_bias;

  /// Throws InvalidArgument if shapes disagree with config or an entry is not finite.
  void validate() const;

  friend bool operator==(const Network&, const Network&) = default;
};

/// Partial derivatives of the per-record loss, shaped like Network.
struct Gradients {
  Matrix hidden_weights;
  std::vector<double> hidden_bias;
  Matrix output_weights;
  std::vector<double> output_bias;
};

/// Logistic function 1 / (1 + e^-x), evaluated without overflow.
double sigmoid(double x) noexcept;

/// Weights uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], biases zero.
Network init(NetworkConfig config, std::uint64_t seed);

/// sigmoid(W_out * sigmoid(W_hid * input + b_hid) + b_out)
std::vector<double> forward(const Network& net, std::span<const double> input);

/// Gradient of 0.5 * sum_j (y_j - t_j)^2 with respect to every parameter.
Gradients gradients(const Network& net, std::span<const double> input,
                    std::span<const double> target);

/// 0.5 * sum_j (forward(input)_j - t_j)^2
double record_loss(const Network& net, std::span<const double> input,
                   std::span<const double> target);

struct TrainConfig {
  double learning_rate = 0.05;
  double momentum = 0.0;
  std::size_t max_epochs = 500;
  /// Epochs without validation improvement before stopping.
  std::size_t patience = 6;
  /// Relative drop in validation error an epoch must achieve, against the
  /// last epoch that counted, to reset the patience counter. Smaller gains
  /// still update the best snapshot. 0 counts any strict decrease.
  double min_improvement = 0.0;
  std::uint64_t shuffle_seed = 0;

  void validate() const;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct EpochStats {
  double train_mse = 0.0;
  double validation_mse = 0.0;

  friend bool operator==(const EpochStats&, const EpochStats&) = default;
};

struct TrainReport {
  std::vector<EpochStats> epochs;  // epochs[i] is epoch i + 1
  std::size_t stop_epoch = 0;
  std::size_t best_epoch = 0;
  double best_validation_mse = 0.0;
};

struct TrainResult {
  Network network;
  TrainReport report;
};

/// Network-ready inputs and targets for a set of records.
struct TrainingSet {
  std::size_t input_size = 0;
  std::size_t output_size = 0;
  std::vector<double> inputs;   // row-major, one row per record
  std::vector<double> targets;  // row-major, one row per record

  std::size_t size() const noexcept { return output_size ? targets.size() / output_size : 0; }
  std::span<const double> input(std::size_t i) const {
    return {inputs.data() + i * input_size, input_size};
  }
  std::span<const double> target(std::size_t i) const {
    return {targets.data() + i * output_size, output_size};
  }

  void append(const Observation& obs, const DatasetMeta& meta);
};

/// Input vector for one snapshot. Locations are mapped into [0,1] through
/// `meta.bounds` unless `meta.scale` says that already happened.
std::vector<double> encode_input(std::span<const Location> locations, const DatasetMeta& meta);

TrainingSet make_training_set(const NormalizedDataset& ds, const SplitAssignment& split,
                              SplitTag tag);

/// Mean over records and outputs of (y - t)^2.
double mean_squared_error(const Network& net, const TrainingSet& data);

/// Per-record stochastic gradient descent with validation-based early stopping.
///
/// Each epoch shuffles the training slice (seeded by `shuffle_seed` and the
/// epoch number), applies one update per record, then measures the mean
/// squared error on both slices. Training stops once `patience` consecutive
/// epochs fail to lower the validation error by `min_improvement`, or at
/// `max_epochs`. The returned network is the snapshot taken at the best
/// epoch. Starting weights are whatever `net` holds, so this also serves
/// warm-start retraining.
TrainResult train_early_stop(Network net, const TrainingSet& train, const TrainingSet& validation,
                             const TrainConfig& tc);

TrainResult train_early_stop(Network net, const NormalizedDataset& ds,
                             const SplitAssignment& split, const TrainConfig& tc);

/// Hostility per object for N locations given in area coordinates.
std::vector<double> predict(const Network& net, const DatasetMeta& meta,
                            std::span<const Location> locations);

// Model file: `sentinel-model v1`, a config line, then the weight blocks.
void write_network(const Network& net, std::ostream& out);
void write_network(const Network& net, const std::filesystem::path& path);
/// Reads one model. With `to_eof`, trailing lines are an error; otherwise the
/// stream is left positioned after the last weight block.
Network read_network(std::istream& in, const std::string& source = "<stream>",
                     bool to_eof = true);
Network read_network(const std::filesystem::path& path);

void write_report_csv(const TrainReport& report, std::ostream& out);

}  // namespace sentinel
