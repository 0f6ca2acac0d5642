// Copyright 2026 The Sentinel Authors
// SPDX-License-Identifier: Apache-2.0

#include "sentinel/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "sentinel/error.hpp"
#include "sentinel/random.hpp"
#include "sentinel/text.hpp"

namespace sentinel {

bool AreaBounds::valid() const noexcept {
  return std::isfinite(min_x) && std::isfinite(min_y) && std::isfinite(max_x) &&
         std::isfinite(max_y) && min_x < max_x && min_y < max_y;
}

bool AreaBounds::contains(const Location& p) const noexcept {
  return p.x >= min_x && p.x <= max_x && p.y >= min_y && p.y <= max_y;
}

std::string to_string(CoordinateScale scale) {
  return scale == CoordinateScale::none ? "none" : "unit";
}

std::string to_string(const PermutationPolicy& policy) {
  if (std::holds_alternative<FullExpansion>(policy)) return "full";
  const auto& s = std::get<SampledPermutations>(policy);
  return "sample:" + std::to_string(s.count) + ":" + std::to_string(s.seed);
}

std::optional<PermutationPolicy> parse_policy(std::string_view value) {
  if (value == "full") return FullExpansion{};
  auto parts = text::split(value, ':');
  if (parts.size() != 3 || parts[0] != "sample") return std::nullopt;
  auto count = text::parse_uint(parts[1]);
  auto seed = text::parse_uint(parts[2]);
  if (!count || !seed || *count == 0) return std::nullopt;
  return SampledPermutations{static_cast<std::size_t>(*count), *seed};
}

namespace {

void validate_groups(std::size_t n_objects, const std::vector<Group>& groups,
                     const DatasetMeta& meta) {
  if (n_objects == 0) throw InvalidArgument("dataset must have N >= 1");
  if (groups.empty()) throw InvalidArgument("dataset must have K >= 1 groups");
  if (!meta.bounds.valid()) throw InvalidArgument("area bounds must satisfy min < max");
  for (std::size_t k = 0; k < groups.size(); ++k) {
    if (groups[k].empty()) {
      throw InvalidArgument("group " + std::to_string(k + 1) + " is empty");
    }
    for (std::size_t u = 0; u < groups[k].size(); ++u) {
      const Observation& obs = groups[k][u];
      const std::string where =
          "group " + std::to_string(k + 1) + " observation " + std::to_string(u + 1);
      if (obs.locations.size() != n_objects || obs.hostility.size() != n_objects) {
        throw InvalidArgument(where + " has arity " + std::to_string(obs.locations.size()) + "/" +
                              std::to_string(obs.hostility.size()) + ", expected N=" +
                              std::to_string(n_objects));
      }
      for (const Location& p : obs.locations) {
        if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
          throw InvalidArgument(where + " has a non-finite coordinate");
        }
      }
      for (double h : obs.hostility) {
        if (!(h >= 0.0 && h <= 1.0)) {
          throw InvalidArgument(where + " has hostility outside [0,1]");
        }
      }
    }
  }
}

std::size_t count_records(const std::vector<Group>& groups) {
  std::size_t total = 0;
  for (const Group& g : groups) total += g.size();
  return total;
}

template <typename Dataset>
LookupResult lookup_impl(const Dataset& ds, std::size_t k, std::size_t u, std::size_t v) {
  if (k < 1 || k > ds.groups.size()) {
    throw IndexError("group index k=" + std::to_string(k) + " outside [1, K=" +
                     std::to_string(ds.groups.size()) + "]");
  }
  const Group& group = ds.groups[k - 1];
  if (u < 1 || u > group.size()) {
    throw IndexError("observation index u=" + std::to_string(u) + " outside [1, M=" +
                     std::to_string(group.size()) + "]");
  }
  if (v < 1 || v > ds.n_objects) {
    throw IndexError("object index v=" + std::to_string(v) + " outside [1, N=" +
                     std::to_string(ds.n_objects) + "]");
  }
  const Observation& obs = group[u - 1];
  return {obs.locations[v - 1], obs.hostility[v - 1]};
}

std::size_t factorial(std::size_t n) {
  std::size_t f = 1;
  for (std::size_t i = 2; i <= n; ++i) f *= i;
  return f;
}

std::vector<std::vector<std::size_t>> all_permutations(std::size_t n) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::vector<std::vector<std::size_t>> out;
  out.reserve(factorial(n));
  do {
    out.push_back(perm);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return out;
}

std::vector<std::vector<std::size_t>> sample_permutations(std::size_t n, std::size_t count,
                                                          Rng& rng) {
  std::vector<std::size_t> identity(n);
  std::iota(identity.begin(), identity.end(), std::size_t{0});
  std::vector<std::vector<std::size_t>> out{identity};
  std::set<std::vector<std::size_t>> seen{identity};
  while (out.size() < count) {
    std::vector<std::size_t> perm = identity;
    rng.shuffle(std::span<std::size_t>(perm));
    if (seen.insert(perm).second) out.push_back(std::move(perm));
  }
  return out;
}

Location scale_checked(const Location& p, const AreaBounds& b) {
  if (!b.contains(p)) {
    throw InvalidArgument("location (" + text::format_shortest(p.x) + ", " +
                          text::format_shortest(p.y) + ") outside area bounds");
  }
  return scale_location(p, b);
}

template <typename Dataset>
Dataset scale_impl(const Dataset& ds, const DatasetMeta& meta) {
  if (ds.meta.scale != CoordinateScale::none) {
    throw InvalidArgument("coordinates are already scaled");
  }
  if (!meta.bounds.valid()) throw InvalidArgument("area bounds must satisfy min < max");
  Dataset out = ds;
  for (Group& g : out.groups) {
    for (Observation& obs : g) {
      for (Location& p : obs.locations) p = scale_checked(p, meta.bounds);
    }
  }
  out.meta = meta;
  out.meta.scale = CoordinateScale::unit_interval;
  return out;
}

// ---- text format -------------------------------------------------------

struct Header {
  std::size_t n = 0;
  std::size_t k = 0;
  DatasetMeta meta;
  std::optional<std::string> source;
  std::optional<PermutationPolicy> policy;
};

void write_header(std::ostream& out, std::size_t n, std::size_t k, const DatasetMeta& meta) {
  const AreaBounds& b = meta.bounds;
  out << "N=" << n << " K=" << k << " bounds=" << text::format_shortest(b.min_x) << ','
      << text::format_shortest(b.min_y) << ',' << text::format_shortest(b.max_x) << ','
      << text::format_shortest(b.max_y) << " scale=" << to_string(meta.scale)
      << " seed=" << meta.seed;
}

void write_groups(std::ostream& out, const std::vector<Group>& groups) {
  for (std::size_t k = 0; k < groups.size(); ++k) {
    out << "group " << (k + 1) << " M=" << groups[k].size() << '\n';
    for (const Observation& obs : groups[k]) {
      for (std::size_t v = 0; v < obs.locations.size(); ++v) {
        if (v) out << ' ';
        out << text::format_shortest(obs.locations[v].x) << ' '
            << text::format_shortest(obs.locations[v].y);
      }
      out << " |";
      for (double h : obs.hostility) out << ' ' << text::format_shortest(h);
      out << '\n';
    }
  }
}

class LineReader {
 public:
  LineReader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}

  bool next(std::string& line) {
    if (!std::getline(in_, line)) return false;
    ++line_no_;
    if (!line.empty() && line.back() == '\r') fail("carriage return in line");
    return true;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw FormatError(source_, line_no_, what);
  }

  std::size_t line_no() const noexcept { return line_no_; }

 private:
  std::istream& in_;
  std::string source_;
  std::size_t line_no_ = 0;
};

std::string_view expect_key(LineReader& r, std::string_view token, std::string_view key) {
  if (token.size() <= key.size() || token.substr(0, key.size()) != key ||
      token[key.size()] != '=') {
    r.fail("expected `" + std::string(key) + "=<value>`, got `" + std::string(token) + "`");
  }
  return token.substr(key.size() + 1);
}

std::size_t parse_count(LineReader& r, std::string_view token, std::string_view what) {
  auto value = text::parse_uint(token);
  if (!value) r.fail("invalid " + std::string(what) + " `" + std::string(token) + "`");
  return static_cast<std::size_t>(*value);
}

double parse_number(LineReader& r, std::string_view token, std::string_view what) {
  auto value = text::parse_double(token);
  if (!value) r.fail("invalid " + std::string(what) + " `" + std::string(token) + "`");
  return *value;
}

PermutationPolicy parse_policy(LineReader& r, std::string_view value) {
  auto policy = sentinel::parse_policy(value);
  if (!policy) r.fail("policy must be `full` or `sample:<count>:<seed>`");
  return *policy;
}

Header read_header(LineReader& r, bool normalized) {
  std::string line;
  if (!r.next(line)) r.fail("empty file, expected header `N=<n> K=<k>`");
  auto tokens = text::split(line);
  const std::size_t expected = normalized ? 7 : 5;
  if (tokens.size() != 2 && tokens.size() != expected) {
    r.fail(normalized ? "header must be `N=<n> K=<k> bounds=... scale=... seed=... source=... "
                        "policy=...`"
                      : "header must be `N=<n> K=<k>` optionally followed by `bounds=... "
                        "scale=... seed=...`");
  }
  Header h;
  h.n = parse_count(r, expect_key(r, tokens[0], "N"), "N");
  h.k = parse_count(r, expect_key(r, tokens[1], "K"), "K");
  if (h.n == 0) r.fail("N must be >= 1");
  if (h.k == 0) r.fail("K must be >= 1");
  if (tokens.size() == 2) {
    if (normalized) r.fail("normalized dataset header requires provenance fields");
    h.meta.bounds = {0.0, 0.0, 1.0, 1.0};
    return h;
  }
  auto bounds = text::split(expect_key(r, tokens[2], "bounds"), ',');
  if (bounds.size() != 4) r.fail("bounds must be `min_x,min_y,max_x,max_y`");
  h.meta.bounds = {parse_number(r, bounds[0], "bound"), parse_number(r, bounds[1], "bound"),
                   parse_number(r, bounds[2], "bound"), parse_number(r, bounds[3], "bound")};
  if (!h.meta.bounds.valid()) r.fail("bounds must satisfy min < max");
  auto scale = expect_key(r, tokens[3], "scale");
  if (scale == "none") {
    h.meta.scale = CoordinateScale::none;
  } else if (scale == "unit") {
    h.meta.scale = CoordinateScale::unit_interval;
  } else {
    r.fail("scale must be `none` or `unit`");
  }
  auto seed = text::parse_uint(expect_key(r, tokens[4], "seed"));
  if (!seed) r.fail("invalid seed");
  h.meta.seed = *seed;
  if (normalized) {
    h.source = std::string(expect_key(r, tokens[5], "source"));
    h.policy = parse_policy(r, expect_key(r, tokens[6], "policy"));
  }
  return h;
}

Observation parse_observation(LineReader& r, const std::string& line, std::size_t n) {
  auto tokens = text::split(line);
  const std::size_t expected = 3 * n + 1;
  if (tokens.size() != expected || tokens[2 * n] != "|") {
    r.fail("record has " + std::to_string(tokens.size()) + " fields, expected " +
           std::to_string(expected) + " (`x1 y1 ... x" + std::to_string(n) + " y" +
           std::to_string(n) + " | h1 ... h" + std::to_string(n) + "`)");
  }
  Observation obs;
  obs.locations.reserve(n);
  obs.hostility.reserve(n);
  for (std::size_t v = 0; v < n; ++v) {
    obs.locations.push_back(
        {parse_number(r, tokens[2 * v], "coordinate"), parse_number(r, tokens[2 * v + 1], "coordinate")});
  }
  for (std::size_t v = 0; v < n; ++v) {
    double h = parse_number(r, tokens[2 * n + 1 + v], "hostility");
    if (h < 0.0 || h > 1.0) r.fail("hostility outside [0,1]");
    obs.hostility.push_back(h);
  }
  return obs;
}

std::vector<Group> read_groups(LineReader& r, const Header& h) {
  std::vector<Group> groups;
  std::string line;
  for (std::size_t k = 1; k <= h.k; ++k) {
    if (!r.next(line)) r.fail("missing `group " + std::to_string(k) + " M=<m>` line");
    auto tokens = text::split(line);
    if (tokens.size() != 3 || tokens[0] != "group") r.fail("expected `group <k> M=<m>`");
    if (parse_count(r, tokens[1], "group index") != k) {
      r.fail("expected group index " + std::to_string(k));
    }
    std::size_t m = parse_count(r, expect_key(r, tokens[2], "M"), "M");
    if (m == 0) r.fail("group " + std::to_string(k) + " is empty");
    Group g;
    g.reserve(m);
    for (std::size_t u = 0; u < m; ++u) {
      if (!r.next(line)) r.fail("group " + std::to_string(k) + " ended after " + std::to_string(u) + " of " + std::to_string(m) + " records");
      g.push_back(parse_observation(r, line, h.n));
    }
    groups.push_back(std::move(g));
  }
  if (r.next(line)) r.fail("trailing content after last group");
  return groups;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return in;
}

}  // namespace

void RawDataset::validate() const { validate_groups(n_objects, groups, meta); }
std::size_t RawDataset::total_records() const noexcept { return count_records(groups); }
void NormalizedDataset::validate() const { validate_groups(n_objects, groups, meta); }
std::size_t NormalizedDataset::total_records() const noexcept { return count_records(groups); }

LookupResult lookup(const RawDataset& ds, std::size_t k, std::size_t u, std::size_t v) {
  return lookup_impl(ds, k, u, v);
}

LookupResult lookup(const NormalizedDataset& ds, std::size_t k, std::size_t u, std::size_t v) {
  return lookup_impl(ds, k, u, v);
}

Observation permute(const Observation& obs, const std::vector<std::size_t>& perm) {
  if (perm.size() != obs.size()) throw InvalidArgument("permutation arity mismatch");
  Observation out;
  out.locations.reserve(perm.size());
  out.hostility.reserve(perm.size());
  for (std::size_t src : perm) {
    out.locations.push_back(obs.locations.at(src));
    out.hostility.push_back(obs.hostility.at(src));
  }
  return out;
}

NormalizedDataset normalize(const RawDataset& raw, const PermutationPolicy& policy,
                            std::size_t factorial_cap) {
  raw.validate();
  const std::size_t n = raw.n_objects;
  NormalizedDataset out;
  out.n_objects = n;
  out.meta = raw.meta;
  out.provenance = {dataset_id(raw), policy};
  out.groups.reserve(raw.groups.size());

  if (std::holds_alternative<FullExpansion>(policy)) {
    if (n > factorial_cap) {
      throw FactorialCapExceeded("full expansion needs " + std::to_string(n) +
                                 "! permutations per record; N exceeds the cap of " +
                                 std::to_string(factorial_cap) + ", use sampled permutations");
    }
    const auto perms = all_permutations(n);
    for (const Group& g : raw.groups) {
      Group expanded;
      expanded.reserve(g.size() * perms.size());
      for (const Observation& obs : g) {
        for (const auto& perm : perms) expanded.push_back(permute(obs, perm));
      }
      out.groups.push_back(std::move(expanded));
    }
    return out;
  }

  const auto& sample = std::get<SampledPermutations>(policy);
  if (sample.count == 0) throw InvalidArgument("sample count must be >= 1");
  // N! overflows size_t past 20; any count is attainable there.
  if (n <= 20 && sample.count > factorial(n)) {
    throw InvalidArgument("sample count " + std::to_string(sample.count) + " exceeds " +
                          std::to_string(n) + "! distinct permutations");
  }
  Rng rng(sample.seed);
  for (const Group& g : raw.groups) {
    Group expanded;
    expanded.reserve(g.size() * sample.count);
    for (const Observation& obs : g) {
      for (const auto& perm : sample_permutations(n, sample.count, rng)) {
        expanded.push_back(permute(obs, perm));
      }
    }
    out.groups.push_back(std::move(expanded));
  }
  return out;
}

Location scale_location(const Location& p, const AreaBounds& b) {
  return {(p.x - b.min_x) / (b.max_x - b.min_x), (p.y - b.min_y) / (b.max_y - b.min_y)};
}

RawDataset scale_coordinates(const RawDataset& ds, const DatasetMeta& meta) {
  return scale_impl(ds, meta);
}

NormalizedDataset scale_coordinates(const NormalizedDataset& ds, const DatasetMeta& meta) {
  return scale_impl(ds, meta);
}

std::vector<std::size_t> SplitAssignment::indices(SplitTag tag) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    if (tags[i] == tag) out.push_back(i);
  }
  return out;
}

std::size_t SplitAssignment::count(SplitTag tag) const {
  return static_cast<std::size_t>(std::count(tags.begin(), tags.end(), tag));
}

SplitAssignment split_records(std::size_t total, std::uint64_t seed) {
  if (total < 10) {
    throw InvalidArgument("dataset too small to split: " + std::to_string(total) +
                          " records, need at least 10");
  }
  const auto n_train = static_cast<std::size_t>(std::llround(kTrainFraction * static_cast<double>(total)));
  const auto n_val = static_cast<std::size_t>(std::llround(kValidationFraction * static_cast<double>(total)));
  std::vector<std::size_t> order(total);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(order));

  SplitAssignment out;
  out.seed = seed;
  out.tags.assign(total, SplitTag::test);
  for (std::size_t i = 0; i < n_train; ++i) out.tags[order[i]] = SplitTag::train;
  for (std::size_t i = n_train; i < n_train + n_val; ++i) out.tags[order[i]] = SplitTag::validation;
  return out;
}

SplitAssignment split(const NormalizedDataset& ds, std::uint64_t seed) {
  return split_records(ds.total_records(), seed);
}

std::vector<const Observation*> flatten(const NormalizedDataset& ds) {
  std::vector<const Observation*> out;
  out.reserve(ds.total_records());
  for (const Group& g : ds.groups) {
    for (const Observation& obs : g) out.push_back(&obs);
  }
  return out;
}

void write_raw(const RawDataset& ds, std::ostream& out) {
  ds.validate();
  write_header(out, ds.n_objects, ds.groups.size(), ds.meta);
  out << '\n';
  write_groups(out, ds.groups);
}

void write_raw(const RawDataset& ds, const std::filesystem::path& path) {
  auto out = open_out(path);
  write_raw(ds, out);
}

RawDataset read_raw(std::istream& in, const std::string& source) {
  LineReader r(in, source);
  Header h = read_header(r, false);
  RawDataset ds;
  ds.n_objects = h.n;
  ds.meta = h.meta;
  ds.groups = read_groups(r, h);
  return ds;
}

RawDataset read_raw(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_raw(in, path.string());
}

void write_normalized(const NormalizedDataset& ds, std::ostream& out) {
  ds.validate();
  write_header(out, ds.n_objects, ds.groups.size(), ds.meta);
  out << " source=" << ds.provenance.source_id << " policy=" << to_string(ds.provenance.policy)
      << '\n';
  write_groups(out, ds.groups);
}

void write_normalized(const NormalizedDataset& ds, const std::filesystem::path& path) {
  auto out = open_out(path);
  write_normalized(ds, out);
}

NormalizedDataset read_normalized(std::istream& in, const std::string& source) {
  LineReader r(in, source);
  Header h = read_header(r, true);
  NormalizedDataset ds;
  ds.n_objects = h.n;
  ds.meta = h.meta;
  ds.provenance = {*h.source, *h.policy};
  ds.groups = read_groups(r, h);
  return ds;
}

NormalizedDataset read_normalized(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_normalized(in, path.string());
}

std::string dataset_id(const RawDataset& ds) {
  std::ostringstream out;
  write_header(out, ds.n_objects, ds.groups.size(), ds.meta);
  out << '\n';
  write_groups(out, ds.groups);
  return text::fnv1a_hex(out.str());
}

}  // namespace sentinel
