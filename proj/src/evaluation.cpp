// Copyright 2026 The Sentinel Authors
// SPDX-License-Identifier: Apache-2.0

#include "sentinel/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <sstream>

#include "sentinel/error.hpp"
#include "sentinel/text.hpp"

namespace sentinel {

std::string to_string(ConfusionMode mode) {
  return mode == ConfusionMode::argmax ? "argmax" : "threshold";
}

Predictions evaluate(const Network& net, const DatasetMeta& meta,
                     const std::vector<Observation>& records) {
  Predictions p;
  p.outputs.reserve(records.size());
  p.targets.reserve(records.size());
  for (const Observation& obs : records) {
    p.outputs.push_back(forward(net, encode_input(obs.locations, meta)));
    p.targets.push_back(obs.hostility);
  }
  return p;
}

std::vector<Observation> select_records(const NormalizedDataset& ds,
                                        const SplitAssignment& assignment, SplitTag tag) {
  auto records = flatten(ds);
  if (records.size() != assignment.tags.size()) {
    throw InvalidArgument("split does not cover the dataset");
  }
  std::vector<Observation> out;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (assignment.tags[i] == tag) out.push_back(*records[i]);
  }
  return out;
}

std::size_t ConfusionMatrix::count(std::size_t predicted, std::size_t target) const {
  if (mode != ConfusionMode::argmax) throw InvalidArgument("count() needs an argmax matrix");
  return counts.at(predicted * n_objects + target);
}

std::size_t ConfusionMatrix::object_count(std::size_t object, bool predicted, bool target) const {
  if (mode != ConfusionMode::threshold) {
    throw InvalidArgument("object_count() needs a threshold matrix");
  }
  return counts.at(object * 4 + (predicted ? 2 : 0) + (target ? 1 : 0));
}

std::size_t ConfusionMatrix::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::size_t{0});
}

double ConfusionMatrix::accuracy() const {
  const std::size_t all = total();
  if (all == 0) return 0.0;
  std::size_t agree = 0;
  for (std::size_t v = 0; v < n_objects; ++v) {
    agree += mode == ConfusionMode::argmax ? count(v, v)
                                            : object_count(v, false, false) + object_count(v, true, true);
  }
  return static_cast<double>(agree) / static_cast<double>(all);
}

double ConfusionMatrix::percent(std::size_t predicted, std::size_t target) const {
  const std::size_t all = total();
  return all ? 100.0 * static_cast<double>(count(predicted, target)) / static_cast<double>(all) : 0.0;
}

std::size_t ConfusionMatrix::row_total(std::size_t predicted) const {
  std::size_t sum = 0;
  for (std::size_t t = 0; t < n_objects; ++t) sum += count(predicted, t);
  return sum;
}

std::size_t ConfusionMatrix::column_total(std::size_t target) const {
  std::size_t sum = 0;
  for (std::size_t p = 0; p < n_objects; ++p) sum += count(p, target);
  return sum;
}

ConfusionMatrix confusion(const Predictions& predictions, ConfusionMode mode, double threshold) {
  if (predictions.size() == 0) throw InvalidArgument("no records to evaluate");
  if (predictions.targets.size() != predictions.outputs.size()) {
    throw InvalidArgument("outputs and targets differ in length");
  }
  ConfusionMatrix cm;
  cm.mode = mode;
  cm.threshold = threshold;
  cm.n_objects = predictions.outputs.front().size();
  cm.records = predictions.size();
  const std::size_t n = cm.n_objects;
  cm.counts.assign(mode == ConfusionMode::argmax ? n * n : 4 * n, 0);

  for (std::size_t r = 0; r < predictions.size(); ++r) {
    const auto& y = predictions.outputs[r];
    const auto& t = predictions.targets[r];
    if (y.size() != n || t.size() != n) throw InvalidArgument("record arity mismatch");
    if (mode == ConfusionMode::argmax) {
      const auto hostile = std::count(t.begin(), t.end(), 1.0);
      const auto zeros = std::count(t.begin(), t.end(), 0.0);
      if (hostile != 1 || zeros + 1 != static_cast<long>(n)) {
        throw InvalidArgument("record " + std::to_string(r + 1) +
                              " does not have exactly one hostile object; use threshold mode");
      }
      // max_element returns the first maximum, i.e. the lowest index on ties.
      const auto predicted = static_cast<std::size_t>(std::max_element(y.begin(), y.end()) - y.begin());
      const auto target = static_cast<std::size_t>(std::find(t.begin(), t.end(), 1.0) - t.begin());
      ++cm.counts[predicted * n + target];
    } else {
      for (std::size_t v = 0; v < n; ++v) {
        const bool predicted = y[v] >= threshold;
        const bool target = t[v] >= 0.5;
        ++cm.counts[v * 4 + (predicted ? 2 : 0) + (target ? 1 : 0)];
      }
    }
  }
  return cm;
}

ConfusionMatrix confusion(const Network& net, const DatasetMeta& meta,
                          const std::vector<Observation>& records, ConfusionMode mode,
                          double threshold) {
  return confusion(evaluate(net, meta, records), mode, threshold);
}

std::size_t ErrorHistogram::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::size_t{0});
}

std::size_t ErrorHistogram::modal_bin() const {
  return static_cast<std::size_t>(std::max_element(counts.begin(), counts.end()) - counts.begin());
}

ErrorHistogram error_histogram(const Predictions& predictions, std::size_t bins) {
  if (predictions.size() == 0) throw InvalidArgument("no records to evaluate");
  if (bins == 0) throw InvalidArgument("histogram needs at least one bin");
  ErrorHistogram h;
  for (std::size_t i = 0; i <= bins; ++i) h.edges.push_back(static_cast<double>(i) / static_cast<double>(bins));
  h.counts.assign(bins, 0);
  for (std::size_t r = 0; r < predictions.size(); ++r) {
    const auto& y = predictions.outputs[r];
    const auto& t = predictions.targets.at(r);
    if (y.size() != t.size()) throw InvalidArgument("record arity mismatch");
    for (std::size_t v = 0; v < y.size(); ++v) {
      const double err = std::clamp(std::abs(y[v] - t[v]), 0.0, 1.0);
      const auto bin = std::min(bins - 1, static_cast<std::size_t>(err * static_cast<double>(bins)));
      ++h.counts[bin];
    }
  }
  return h;
}

ErrorHistogram error_histogram(const Network& net, const DatasetMeta& meta,
                               const std::vector<Observation>& records, std::size_t bins) {
  return error_histogram(evaluate(net, meta, records), bins);
}

// ---- output ------------------------------------------------------------

namespace {

std::string cell(std::size_t count, double pct) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%zu %.1f%%", count, pct);
  return buf;
}

std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : std::string(width - s.size(), ' ') + s;
}

}  // namespace

std::string format_table(const ConfusionMatrix& cm) {
  std::ostringstream out;
  const std::size_t n = cm.n_objects;
  const double all = static_cast<double>(cm.total());
  constexpr std::size_t w = 14;
  if (cm.mode == ConfusionMode::argmax) {
    out << "confusion (argmax), rows = output class, columns = target class, " << cm.records
        << " records\n";
    out << pad("", 8);
    for (std::size_t t = 0; t < n; ++t) out << pad(std::to_string(t + 1), w);
    out << pad("precision", w) << '\n';
    for (std::size_t p = 0; p < n; ++p) {
      out << pad(std::to_string(p + 1), 8);
      for (std::size_t t = 0; t < n; ++t) out << pad(cell(cm.count(p, t), cm.percent(p, t)), w);
      const std::size_t row = cm.row_total(p);
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.1f%%", row ? 100.0 * cm.count(p, p) / row : 0.0);
      out << pad(buf, w) << '\n';
    }
    out << pad("recall", 8);
    for (std::size_t t = 0; t < n; ++t) {
      const std::size_t col = cm.column_total(t);
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.1f%%", col ? 100.0 * cm.count(t, t) / col : 0.0);
      out << pad(buf, w);
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f%%", 100.0 * cm.accuracy());
    out << pad(buf, w) << '\n';
    return out.str();
  }
  out << "confusion (threshold " << text::format_shortest(cm.threshold)
      << "), per object: predicted/target counts, " << cm.records << " records\n";
  out << pad("object", 8) << pad("TN", w) << pad("FP", w) << pad("FN", w) << pad("TP", w) << '\n';
  for (std::size_t v = 0; v < n; ++v) {
    out << pad(std::to_string(v + 1), 8);
    for (auto [p, t] : {std::pair{false, false}, {true, false}, {false, true}, {true, true}}) {
      const std::size_t c = cm.object_count(v, p, t);
      out << pad(cell(c, all ? 100.0 * c / all : 0.0), w);
    }
    out << '\n';
  }
  char buf[48];
  std::snprintf(buf, sizeof buf, "accuracy %.2f%%\n", 100.0 * cm.accuracy());
  out << buf;
  return out.str();
}

std::string format_table(const ErrorHistogram& hist) {
  std::ostringstream out;
  const std::size_t peak = hist.counts.empty() ? 0 : hist.counts[hist.modal_bin()];
  for (std::size_t b = 0; b < hist.counts.size(); ++b) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "[%.3f, %.3f%c %10zu ", hist.edges[b], hist.edges[b + 1],
                  b + 1 == hist.counts.size() ? ']' : ')', hist.counts[b]);
    out << buf;
    const std::size_t bar = peak ? (hist.counts[b] * 50 + peak - 1) / peak : 0;
    out << std::string(bar, '#') << '\n';
  }
  return out.str();
}

void write_csv(const ConfusionMatrix& cm, std::ostream& out) {
  const double all = static_cast<double>(cm.total());
  if (cm.mode == ConfusionMode::argmax) {
    out << "output_class,target_class,count,percent\n";
    for (std::size_t p = 0; p < cm.n_objects; ++p) {
      for (std::size_t t = 0; t < cm.n_objects; ++t) {
        out << (p + 1) << ',' << (t + 1) << ',' << cm.count(p, t) << ','
            << text::format_precise(cm.percent(p, t)) << '\n';
      }
    }
    return;
  }
  out << "object,predicted_hostile,target_hostile,count,percent\n";
  for (std::size_t v = 0; v < cm.n_objects; ++v) {
    for (int p = 0; p < 2; ++p) {
      for (int t = 0; t < 2; ++t) {
        const std::size_t c = cm.object_count(v, p, t);
        out << (v + 1) << ',' << p << ',' << t << ',' << c << ','
            << text::format_precise(all ? 100.0 * c / all : 0.0) << '\n';
      }
    }
  }
}

void write_csv(const ErrorHistogram& hist, std::ostream& out) {
  out << "bin_low,bin_high,count\n";
  for (std::size_t b = 0; b < hist.counts.size(); ++b) {
    out << text::format_shortest(hist.edges[b]) << ',' << text::format_shortest(hist.edges[b + 1])
        << ',' << hist.counts[b] << '\n';
  }
}

}  // namespace sentinel
