// Copyright 2026 The Sentinel Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "sentinel/dataset.hpp"
#include "sentinel/mlp.hpp"

namespace sentinel {

enum class ConfusionMode { argmax, threshold };

std::string to_string(ConfusionMode mode);

inline constexpr double kDefaultThreshold = 0.5;

/// Network outputs next to their targets, one row per record.
struct Predictions {
  std::vector<std::vector<double>> outputs;
  std::vector<std::vector<double>> targets;

  std::size_t size() const noexcept { return outputs.size(); }
};

Predictions evaluate(const Network& net, const DatasetMeta& meta,
                     const std::vector<Observation>& records);

/// Records of `ds` carrying `tag` in `assignment`, in dataset order.
std::vector<Observation> select_records(const NormalizedDataset& ds,
                                        const SplitAssignment& assignment, SplitTag tag);

/// Argmax mode: an N x N matrix, `count(predicted, target)` with classes as
/// 0-based object slots. Threshold mode: one 2 x 2 block per object,
/// `object_count(v, predicted_hostile, target_hostile)`.
struct ConfusionMatrix {
  ConfusionMode mode = ConfusionMode::argmax;
  std::size_t n_objects = 0;
  double threshold = kDefaultThreshold;
  std::size_t records = 0;
  std::vector<std::size_t> counts;

  std::size_t count(std::size_t predicted, std::size_t target) const;
  std::size_t object_count(std::size_t object, bool predicted, bool target) const;

  std::size_t total() const;
  /// Share of all counts on the diagonal (argmax) or on agreeing cells (threshold).
  double accuracy() const;
  /// Cell percentage of the grand total.
  double percent(std::size_t predicted, std::size_t target) const;
  std::size_t row_total(std::size_t predicted) const;
  std::size_t column_total(std::size_t target) const;
};

/// Argmax mode requires exactly one target of 1.0 per record; ties in the
/// output go to the lowest index. Threshold mode calls an object hostile
/// when its output is >= threshold.
ConfusionMatrix confusion(const Predictions& predictions, ConfusionMode mode,
                          double threshold = kDefaultThreshold);
ConfusionMatrix confusion(const Network& net, const DatasetMeta& meta,
                          const std::vector<Observation>& records, ConfusionMode mode,
                          double threshold = kDefaultThreshold);

/// Counts of |output - target| over equal-width bins covering [0, 1].
struct ErrorHistogram {
  std::vector<double> edges;  // bins + 1 entries
  std::vector<std::size_t> counts;

  std::size_t total() const;
  std::size_t modal_bin() const;
};

ErrorHistogram error_histogram(const Predictions& predictions, std::size_t bins = 20);
ErrorHistogram error_histogram(const Network& net, const DatasetMeta& meta,
                               const std::vector<Observation>& records, std::size_t bins = 20);

// Human-readable tables and CSV files, see docs/formats.md.
std::string format_table(const ConfusionMatrix& cm);
std::string format_table(const ErrorHistogram& hist);
void write_csv(const ConfusionMatrix& cm, std::ostream& out);
void write_csv(const ErrorHistogram& hist, std::ostream& out);

}  // namespace sentinel
