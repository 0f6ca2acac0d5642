// Copyright 2026 The Sentinel Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <numeric>
#include <set>
#include <sstream>

#include "doctest.h"
#include "fixtures.hpp"
#include "sentinel/dataset.hpp"
#include "sentinel/error.hpp"

using namespace sentinel;
using sentinel::testing::make_obs;
using sentinel::testing::reference_tables;

namespace {

std::size_t factorial(std::size_t n) { return n <= 1 ? 1 : n * factorial(n - 1); }

RawDataset single_group(std::size_t n, std::size_t m) {
  RawDataset ds;
  ds.n_objects = n;
  ds.meta.bounds = {0, 0, 1000, 1000};
  Group g;
  for (std::size_t u = 0; u < m; ++u) {
    Observation obs;
    for (std::size_t v = 0; v < n; ++v) {
      obs.locations.push_back({static_cast<double>(u * 10 + v), static_cast<double>(v)});
      obs.hostility.push_back(v == u % n ? 1.0 : 0.0);
    }
    g.push_back(obs);
  }
  ds.groups.push_back(std::move(g));
  return ds;
}

}  // namespace

TEST_CASE("lookup addresses cells with 1-based (k, u, v)") {
  const RawDataset ds = reference_tables();
  auto cell = lookup(ds, 1, 2, 3);
  CHECK(cell.location == Location{154, 601});
  CHECK(cell.hostility == 0.0);
  CHECK(lookup(ds, 2, 3, 1).hostility == 0.0);
  CHECK(lookup(ds, 1, 4, 3).hostility == 1.0);

  CHECK_THROWS_WITH_AS(lookup(ds, 1, 1, 4), doctest::Contains("object index v=4"), IndexError);
  CHECK_THROWS_WITH_AS(lookup(ds, 3, 1, 1), doctest::Contains("group index k=3"), IndexError);
  CHECK_THROWS_WITH_AS(lookup(ds, 2, 4, 1), doctest::Contains("observation index u=4"), IndexError);
  CHECK_THROWS_AS(lookup(ds, 0, 1, 1), IndexError);
}

TEST_CASE("full normalization of two objects emits both orderings of each record") {
  RawDataset raw;
  raw.n_objects = 2;
  raw.meta.bounds = {0, 0, 10, 10};
  raw.groups.push_back({make_obs({1, 2, 3, 4}, {1, 0}), make_obs({5, 6, 7, 8}, {0, 1})});

  auto norm = normalize(raw, FullExpansion{});
  REQUIRE(norm.groups.size() == 1);
  REQUIRE(norm.groups[0].size() == 4);
  CHECK(norm.groups[0][0] == make_obs({1, 2, 3, 4}, {1, 0}));
  CHECK(norm.groups[0][1] == make_obs({3, 4, 1, 2}, {0, 1}));
  CHECK(norm.groups[0][2] == make_obs({5, 6, 7, 8}, {0, 1}));
  CHECK(norm.groups[0][3] == make_obs({7, 8, 5, 6}, {1, 0}));
}

TEST_CASE("full normalization grows each group by N!") {
  auto norm = normalize(reference_tables(), FullExpansion{});
  CHECK(norm.groups[0].size() == 24);
  CHECK(norm.groups[1].size() == 18);
  CHECK(norm.provenance.source_id == dataset_id(reference_tables()));

  // Lexicographic permutation order within one record: (0 1 2), (0 2 1), (1 0 2), ...
  CHECK(norm.groups[0][1].locations[1] == Location{764, 214});
  CHECK(norm.groups[0][2].locations[0] == Location{214, 856});
  CHECK(norm.groups[0][5].locations[0] == Location{764, 214});
}

TEST_CASE("normalizing a single object is the identity") {
  auto raw = single_group(1, 5);
  auto norm = normalize(raw, FullExpansion{});
  CHECK(norm.groups == raw.groups);
}

TEST_CASE("desk-scale shape: 494 records of 5 objects expand to 59,280") {
  auto norm = normalize(single_group(5, 494), FullExpansion{});
  CHECK(norm.total_records() == 494 * 120);
  CHECK(norm.total_records() == 59280);
  // The reported test confusion matrix column totals.
  const std::size_t fig_columns = 1171 + 1199 + 1194 + 1186 + 1178;
  CHECK(fig_columns == 5928);
  auto s = split(norm, 3);
  CHECK(s.count(SplitTag::test) == fig_columns);
}

TEST_CASE("full expansion above the factorial cap is refused") {
  auto raw = single_group(8, 1);
  CHECK_THROWS_AS(normalize(raw, FullExpansion{}), FactorialCapExceeded);
  CHECK_NOTHROW(normalize(single_group(3, 1), FullExpansion{}, 3));
  CHECK_THROWS_AS(normalize(single_group(3, 1), FullExpansion{}, 2), FactorialCapExceeded);
}

TEST_CASE("sampled normalization keeps identity first and draws distinct permutations") {
  auto raw = single_group(8, 3);
  auto norm = normalize(raw, SampledPermutations{10, 42});
  REQUIRE(norm.groups[0].size() == 30);
  for (std::size_t u = 0; u < 3; ++u) {
    CHECK(norm.groups[0][u * 10] == raw.groups[0][u]);
    std::set<std::vector<double>> distinct;
    for (std::size_t i = 0; i < 10; ++i) {
      distinct.insert(sentinel::testing::flat_key(norm.groups[0][u * 10 + i]));
    }
    CHECK(distinct.size() == 10);
  }
  CHECK(normalize(raw, SampledPermutations{10, 42}) == norm);
  CHECK(normalize(raw, SampledPermutations{10, 43}).groups != norm.groups);

  CHECK_THROWS_AS(normalize(single_group(3, 1), SampledPermutations{7, 1}), InvalidArgument);
  CHECK(normalize(single_group(3, 1), SampledPermutations{6, 1}).total_records() == 6);
}

TEST_CASE("normalize rejects invalid probabilities and arity") {
  auto raw = reference_tables();
  raw.groups[0][1].hostility[0] = 1.5;
  CHECK_THROWS_AS(normalize(raw, FullExpansion{}), InvalidArgument);
  raw = reference_tables();
  raw.groups[1][0].locations.pop_back();
  CHECK_THROWS_AS(normalize(raw, FullExpansion{}), InvalidArgument);
}

TEST_CASE("property: labels travel with their objects under normalization") {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng.below(4);
    auto raw = sentinel::testing::random_raw(rng, n, 2, 3);
    auto norm = normalize(raw, FullExpansion{});
    const std::size_t perms = factorial(n);
    for (std::size_t k = 0; k < raw.groups.size(); ++k) {
      for (std::size_t u = 0; u < raw.groups[k].size(); ++u) {
        std::vector<std::size_t> sigma(n);
        std::iota(sigma.begin(), sigma.end(), std::size_t{0});
        for (std::size_t p = 0; p < perms; ++p) {
          const Observation& src = raw.groups[k][u];
          const Observation& out = norm.groups[k][u * perms + p];
          for (std::size_t i = 0; i < n; ++i) {
            CHECK(out.locations[i] == src.locations[sigma[i]]);
            CHECK(out.hostility[i] == src.hostility[sigma[i]]);
          }
          std::next_permutation(sigma.begin(), sigma.end());
        }
      }
    }
  }
}

TEST_CASE("scale_coordinates maps bounds affinely onto the unit square") {
  RawDataset raw = reference_tables();
  DatasetMeta meta = raw.meta;
  auto scaled = scale_coordinates(raw, meta);
  CHECK(scaled.meta.scale == CoordinateScale::unit_interval);
  CHECK(scaled.groups[0][0].locations[0].x == doctest::Approx(0.234).epsilon(1e-15));
  CHECK(scaled.groups[0][0].locations[0].y == doctest::Approx(0.874).epsilon(1e-15));
  CHECK(scaled.groups[0] [0].hostility == raw.groups[0][0].hostility);

  CHECK(scale_location({0, 0}, {0, 0, 1000, 1000}) == Location{0.0, 0.0});
  CHECK(scale_location({150, 150}, {100, 100, 200, 200}) == Location{0.5, 0.5});

  CHECK_THROWS_WITH_AS(scale_coordinates(scaled, meta), doctest::Contains("already scaled"),
                       InvalidArgument);
  meta.bounds = {0, 0, 500, 500};
  CHECK_THROWS_WITH_AS(scale_coordinates(raw, meta), doctest::Contains("outside area bounds"),
                       InvalidArgument);
}

TEST_CASE("split partitions records 70/20/10 reproducibly") {
  auto s = split_records(59280, 9);
  CHECK(s.count(SplitTag::train) == 41496);
  CHECK(s.count(SplitTag::validation) == 11856);
  CHECK(s.count(SplitTag::test) == 5928);

  auto small = split_records(10, 1);
  CHECK(small.count(SplitTag::train) == 7);
  CHECK(small.count(SplitTag::validation) == 2);
  CHECK(small.count(SplitTag::test) == 1);

  CHECK(split_records(1000, 5) == split_records(1000, 5));
  CHECK(split_records(1000, 5).tags != split_records(1000, 6).tags);
  CHECK_THROWS_WITH_AS(split_records(9, 1), doctest::Contains("too small"), InvalidArgument);

  // Rounding: 15 -> 10.5 rounds to 11 train, 3 validation, 1 test.
  auto odd = split_records(15, 2);
  CHECK(odd.count(SplitTag::train) == 11);
  CHECK(odd.count(SplitTag::validation) == 3);
  CHECK(odd.count(SplitTag::test) == 1);
}

TEST_CASE("raw dataset text round-trips exactly") {
  RawDataset raw = reference_tables();
  raw.groups.resize(1);
  raw.meta.seed = 17;
  std::ostringstream out;
  write_raw(raw, out);
  CHECK(out.str().rfind("N=3 K=1 bounds=0,0,1000,1000 scale=none seed=17\ngroup 1 M=4\n"
                        "234 874 214 856 764 214 | 0 0 1\n",
                        0) == 0);
  std::istringstream in(out.str());
  CHECK(read_raw(in) == raw);

  // Fractional and scaled values survive bit-for-bit.
  auto scaled = scale_coordinates(reference_tables(), reference_tables().meta);
  scaled.groups[1][2].hostility[1] = 0.1 + 0.2;
  std::ostringstream out2;
  write_raw(scaled, out2);
  std::istringstream in2(out2.str());
  CHECK(read_raw(in2) == scaled);

  auto norm = normalize(reference_tables(), SampledPermutations{3, 8});
  std::ostringstream out3;
  write_normalized(norm, out3);
  std::istringstream in3(out3.str());
  CHECK(read_normalized(in3) == norm);
}

TEST_CASE("minimal header defaults to unit bounds") {
  std::istringstream in("N=1 K=1\ngroup 1 M=1\n0.5 0.25 | 1\n");
  auto ds = read_raw(in);
  CHECK(ds.meta.bounds == AreaBounds{0, 0, 1, 1});
  CHECK(ds.groups[0][0].locations[0] == Location{0.5, 0.25});
}

TEST_CASE("malformed dataset files are rejected with line diagnostics") {
  auto parse = [](const std::string& s) {
    std::istringstream in(s);
    return read_raw(in, "t.raw");
  };
  CHECK_THROWS_WITH_AS(parse(""), doctest::Contains("empty file"), FormatError);
  // 2N + N - 1 = 8 value fields plus the separator.
  CHECK_THROWS_WITH_AS(parse("N=3 K=1\ngroup 1 M=1\n1 2 3 4 5 6 | 0 1\n"),
                       doctest::Contains("t.raw:3: record has 9 fields, expected 10"), FormatError);
  CHECK_THROWS_AS(parse("N=2 K=1\ngroup 1 M=2\n1 2 3 4 | 0 1\n1 2 | 1\n"), FormatError);
  CHECK_THROWS_AS(parse("N=1 K=1\ngroup 1 M=1\n1  2 | 1\n"), FormatError);
  CHECK_THROWS_AS(parse("N=1 K=1\ngroup 1 M=2\n1 2 | 1\n"), FormatError);
  CHECK_THROWS_AS(parse("N=1 K=1\ngroup 2 M=1\n1 2 | 1\n"), FormatError);
  CHECK_THROWS_AS(parse("N=1 K=1\ngroup 1 M=1\n1 2 | 1.5\n"), FormatError);
  CHECK_THROWS_AS(parse("N=1 K=1\ngroup 1 M=1\n1 2 | 1\nextra\n"), FormatError);
  CHECK_THROWS_AS(parse("K=1 N=1\ngroup 1 M=1\n1 2 | 1\n"), FormatError);
  CHECK_THROWS_AS(parse("N=1 K=1\ngroup 1 M=1\n1 nan | 1\n"), FormatError);
  CHECK_THROWS_AS(parse("N=1 K=1\r\ngroup 1 M=1\n1 2 | 1\n"), FormatError);
}
