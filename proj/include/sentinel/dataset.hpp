// Copyright 2026 The Sentinel Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace sentinel {

/// Cartesian position inside the area of observation.
struct Location {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Location&, const Location&) = default;
};

/// One snapshot of all N objects together with their hostility targets.
/// `locations[v]` and `hostility[v]` belong to the same object.
struct Observation {
  std::vector<Location> locations;
  std::vector<double> hostility;

  std::size_t size() const noexcept { return locations.size(); }

  friend bool operator==(const Observation&, const Observation&) = default;
};

/// An ordered list of observations from one logged episode.
using Group = std::vector<Observation>;

struct AreaBounds {
  double min_x = 0.0;
  double min_y = 0.0;
  double max_x = 1.0;
  double max_y = 1.0;

  bool valid() const noexcept;
  bool contains(const Location& p) const noexcept;

  friend bool operator==(const AreaBounds&, const AreaBounds&) = default;
};

enum class CoordinateScale { none, unit_interval };

struct DatasetMeta {
  AreaBounds bounds;
  /// `unit_interval` once coordinates have been mapped into [0,1] by `bounds`.
  CoordinateScale scale = CoordinateScale::none;
  std::uint64_t seed = 0;

  friend bool operator==(const DatasetMeta&, const DatasetMeta&) = default;
};

/// Logged snapshots from K independent episodes, each with M^k observations.
struct RawDataset {
  std::size_t n_objects = 0;
  std::vector<Group> groups;
  DatasetMeta meta;

  /// Throws InvalidArgument when K == 0, a group is empty, an observation
  /// has the wrong arity, a value is non-finite or a probability leaves [0,1].
  void validate() const;
  std::size_t total_records() const noexcept;

  friend bool operator==(const RawDataset&, const RawDataset&) = default;
};

struct FullExpansion {
  friend bool operator==(const FullExpansion&, const FullExpansion&) = default;
};

struct SampledPermutations {
  std::size_t count = 1;
  std::uint64_t seed = 0;

  friend bool operator==(const SampledPermutations&, const SampledPermutations&) = default;
};

using PermutationPolicy = std::variant<FullExpansion, SampledPermutations>;

struct Provenance {
  /// Content hash of the source raw dataset's canonical text.
  std::string source_id;
  PermutationPolicy policy;

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

/// Permutation-expanded training data derived from a RawDataset.
struct NormalizedDataset {
  std::size_t n_objects = 0;
  std::vector<Group> groups;
  DatasetMeta meta;
  Provenance provenance;

  void validate() const;
  std::size_t total_records() const noexcept;

  friend bool operator==(const NormalizedDataset&, const NormalizedDataset&) = default;
};

/// Default ceiling on N for full N! expansion.
inline constexpr std::size_t kDefaultFactorialCap = 7;

struct LookupResult {
  Location location;
  double hostility = 0.0;
};

/// Cell (k, u, v) with 1-based group, observation and object indices.
LookupResult lookup(const RawDataset& ds, std::size_t k, std::size_t u, std::size_t v);
LookupResult lookup(const NormalizedDataset& ds, std::size_t k, std::size_t u, std::size_t v);

/// Applies the object reordering `perm` to one observation: the result holds
/// object `perm[i]` of `obs` at slot i, with its hostility label.
Observation permute(const Observation& obs, const std::vector<std::size_t>& perm);

/// Expands every raw observation into simultaneous reorderings of its
/// locations and hostility labels.
///
/// Full expansion emits all N! permutations per record in lexicographic
/// order, so each group grows from M to M * N!. Sampling emits `count`
/// distinct permutations per record, identity first.
NormalizedDataset normalize(const RawDataset& raw, const PermutationPolicy& policy,
                            std::size_t factorial_cap = kDefaultFactorialCap);

/// Maps every coordinate affinely into [0,1] using `meta.bounds`.
/// Rejects data that is already scaled and locations outside the bounds.
RawDataset scale_coordinates(const RawDataset& ds, const DatasetMeta& meta);
NormalizedDataset scale_coordinates(const NormalizedDataset& ds, const DatasetMeta& meta);

Location scale_location(const Location& p, const AreaBounds& bounds);

enum class SplitTag : std::uint8_t { train, validation, test };

inline constexpr double kTrainFraction = 0.70;
inline constexpr double kValidationFraction = 0.20;

/// Random 70/20/10 partition of a dataset's records, flattened group-major.
struct SplitAssignment {
  std::vector<SplitTag> tags;
  std::uint64_t seed = 0;

  std::vector<std::size_t> indices(SplitTag tag) const;
  std::size_t count(SplitTag tag) const;

  friend bool operator==(const SplitAssignment&, const SplitAssignment&) = default;
};

/// Train and validation sizes are rounded; test receives the remainder.
SplitAssignment split(const NormalizedDataset& ds, std::uint64_t seed);
SplitAssignment split_records(std::size_t total_records, std::uint64_t seed);

/// All records of a dataset in group-major order.
std::vector<const Observation*> flatten(const NormalizedDataset& ds);

// Text format, see docs/formats.md.
void write_raw(const RawDataset& ds, std::ostream& out);
void write_raw(const RawDataset& ds, const std::filesystem::path& path);
RawDataset read_raw(std::istream& in, const std::string& source = "<stream>");
RawDataset read_raw(const std::filesystem::path& path);

void write_normalized(const NormalizedDataset& ds, std::ostream& out);
void write_normalized(const NormalizedDataset& ds, const std::filesystem::path& path);
NormalizedDataset read_normalized(std::istream& in, const std::string& source = "<stream>");
NormalizedDataset read_normalized(const std::filesystem::path& path);

/// Content hash identifying a raw dataset.
std::string dataset_id(const RawDataset& ds);

std::string to_string(CoordinateScale scale);

/// `full` or `sample:<count>:<seed>`.
std::string to_string(const PermutationPolicy& policy);
std::optional<PermutationPolicy> parse_policy(std::string_view text);

}  // namespace sentinel
