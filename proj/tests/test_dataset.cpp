#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "fairlab/dataset.hpp"
#include "fairlab/error.hpp"
#include "helpers.hpp"

using namespace fairlab;

namespace {

SpuriousSpec base_spec() {
  SpuriousSpec s;
  s.n_total = 400;
  s.d_core = 3;
  s.d_spur = 2;
  s.d_noise = 1;
  s.seed = 11;
  return s;
}

bool same_data(const GroupedDataset& a, const GroupedDataset& b) {
  return a.labels == b.labels && a.attrs == b.attrs && a.features.rows() == b.features.rows() &&
         a.features.cols() == b.features.cols() && (a.features.array() == b.features.array()).all();
}

GroupedDataset balanced(std::size_t per_group) {
  GroupedDataset d;
  const std::size_t n = 4 * per_group;
  d.features = Matrix::Zero(static_cast<Eigen::Index>(n), 1);
  for (std::size_t i = 0; i < n; ++i) {
    d.labels.push_back(static_cast<std::uint8_t>((i / per_group) / 2));
    d.attrs.push_back(static_cast<std::uint8_t>((i / per_group) % 2));
    d.features(static_cast<Eigen::Index>(i), 0) = static_cast<double>(i);
  }
  return d;
}

}  // namespace

TEST_CASE("generation is deterministic and shaped by its parameters") {
  const auto spec = base_spec();
  const auto a = generate_spurious(spec);
  const auto b = generate_spurious(spec);
  CHECK(same_data(a, b));
  CHECK(a.size() == 400);
  CHECK(a.dim() == 6);
  auto other = spec;
  other.seed = 12;
  CHECK_FALSE(same_data(a, generate_spurious(other)));
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.labels[i] <= 1);
    CHECK(a.attrs[i] <= 1);
  }
}

TEST_CASE("majority fraction 1 aligns every attribute with its label") {
  auto spec = base_spec();
  spec.majority_fraction = 1.0;
  const auto d = generate_spurious(spec);
  for (std::size_t i = 0; i < d.size(); ++i) CHECK(d.attrs[i] == d.labels[i]);
}

TEST_CASE("vanishing noise puts core coordinates at plus or minus core_mean") {
  auto spec = base_spec();
  spec.noise_sigma = 1e-300;
  spec.core_mean = 1.0;
  const auto d = generate_spurious(spec);
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double expected = d.labels[i] ? 1.0 : -1.0;
    for (Eigen::Index k = 0; k < 3; ++k) CHECK(d.features(static_cast<Eigen::Index>(i), k) == expected);
  }
}

TEST_CASE("alignment and subgroup counts follow the binomial model") {
  SpuriousSpec spec = base_spec();
  spec.n_total = 10000;
  spec.majority_fraction = 0.95;
  spec.positive_fraction = 0.25;
  const auto d = generate_spurious(spec);
  std::size_t aligned = 0;
  for (std::size_t i = 0; i < d.size(); ++i) aligned += d.attrs[i] == d.labels[i];
  const double frac = static_cast<double>(aligned) / 10000.0;
  CHECK(frac >= 0.94);
  CHECK(frac <= 0.96);

  const double p = 0.25 * 0.05;
  const double mean = 10000.0 * p;
  const double sd = std::sqrt(10000.0 * p * (1 - p));
  CHECK(std::abs(static_cast<double>(d.count(1, 0)) - mean) <= 4 * sd);
}

TEST_CASE("exact quotas give largest-remainder group counts with no empty group") {
  SpuriousSpec spec = base_spec();
  spec.n_total = 20;
  spec.majority_fraction = 0.95;
  spec.positive_fraction = 0.25;
  spec.exact_quotas = true;
  const auto d = generate_spurious(spec);
  for (int y = 0; y < 2; ++y) {
    for (int a = 0; a < 2; ++a) CHECK(d.count(y, a) >= 1);
  }
  CHECK(d.count(0, 0) + d.count(0, 1) + d.count(1, 0) + d.count(1, 1) == 20);
}

TEST_CASE("invalid specs are rejected") {
  auto spec = base_spec();
  spec.n_total = 3;
  CHECK_THROWS_AS(generate_spurious(spec), InvalidArgument);
  spec = base_spec();
  spec.majority_fraction = 0.5;
  CHECK_THROWS_AS(generate_spurious(spec), InvalidArgument);
  spec = base_spec();
  spec.d_core = spec.d_spur = spec.d_noise = 0;
  CHECK_THROWS_AS(generate_spurious(spec), InvalidArgument);
  spec = base_spec();
  spec.noise_sigma = 0.0;
  CHECK_THROWS_AS(generate_spurious(spec), InvalidArgument);
}

TEST_CASE("apportion sums to the total and favours larger remainders") {
  const std::vector<double> w{0.5, 0.25, 0.25};
  CHECK(apportion(8, w) == std::vector<std::size_t>{4, 2, 2});
  const std::vector<double> w2{1, 1, 1};
  CHECK(apportion(10, w2) == std::vector<std::size_t>{4, 3, 3});
  const std::vector<double> w3{0.8, 0.1, 0.1};
  const auto c = apportion(11788, w3);
  CHECK(c[0] + c[1] + c[2] == 11788);
}

TEST_CASE("stratified split of 8 balanced rows is 4/2/2") {
  GroupedDataset d = balanced(2);
  SplitSpec spec;
  spec.train_fraction = 0.5;
  spec.val_fraction = 0.25;
  spec.test_fraction = 0.25;
  spec.seed = 3;
  // two rows per (y, a) stratum is below the three needed for one per split
  CHECK_THROWS_AS(split(d, spec), InvalidArgument);

  SplitSpec loose = spec;
  loose.stratified = false;
  const auto s = split(d, loose);
  CHECK(s.train.size() == 4);
  CHECK(s.val.size() == 2);
  CHECK(s.test.size() == 2);

  GroupedDataset d8;
  d8.features = Matrix::Zero(8, 1);
  d8.labels = {0, 0, 0, 0, 1, 1, 1, 1};
  d8.attrs = {0, 0, 0, 0, 1, 1, 1, 1};
  const auto s8 = split(d8, spec);
  CHECK(s8.train.size() == 4);
  CHECK(s8.val.size() == 2);
  CHECK(s8.test.size() == 2);
  CHECK(s8.train.count(1, 1) == 2);
  CHECK(s8.val.count(1, 1) == 1);
}

TEST_CASE("split sizes on the 11,788-row example are within one of 9430/1179/1179") {
  SpuriousSpec gen = base_spec();
  gen.n_total = 4795 + 1199 + 5794;
  gen.d_core = 1;
  gen.d_spur = 1;
  gen.d_noise = 0;
  const auto d = generate_spurious(gen);
  SplitSpec spec;
  spec.train_fraction = 0.8;
  spec.val_fraction = 0.1;
  spec.test_fraction = 0.1;
  const auto idx = split_indices(d, spec);
  CHECK(std::abs(static_cast<long>(idx.train.size()) - 9430) <= 1);
  CHECK(std::abs(static_cast<long>(idx.val.size()) - 1179) <= 1);
  CHECK(std::abs(static_cast<long>(idx.test.size()) - 1179) <= 1);
}

TEST_CASE("splits partition the rows, match strata within one row and are deterministic") {
  SpuriousSpec gen = base_spec();
  gen.n_total = 997;
  const auto d = generate_spurious(gen);
  SplitSpec spec;
  spec.seed = 9;
  const auto idx = split_indices(d, spec);
  std::vector<std::size_t> all;
  for (const auto* part : {&idx.train, &idx.val, &idx.test}) all.insert(all.end(), part->begin(), part->end());
  std::sort(all.begin(), all.end());
  REQUIRE(all.size() == d.size());
  for (std::size_t i = 0; i < all.size(); ++i) CHECK(all[i] == i);

  const auto again = split_indices(d, spec);
  CHECK(again.train == idx.train);
  CHECK(again.val == idx.val);
  CHECK(again.test == idx.test);

  const auto parts = split(d, spec);
  const double fractions[3] = {spec.train_fraction, spec.val_fraction, spec.test_fraction};
  const GroupedDataset* sets[3] = {&parts.train, &parts.val, &parts.test};
  for (int y = 0; y < 2; ++y) {
    for (int a = 0; a < 2; ++a) {
      const double total = static_cast<double>(d.count(y, a));
      for (int k = 0; k < 3; ++k) {
        CHECK(std::abs(static_cast<double>(sets[k]->count(y, a)) - fractions[k] * total) < 1.0 + 1e-9);
      }
    }
  }
}

TEST_CASE("csv round trip preserves features bitwise and labels exactly") {
  test::TempDir dir("csv");
  const auto d = generate_spurious(base_spec());
  save_csv(d, dir / "d.csv");
  const auto back = load_csv(dir / "d.csv");
  CHECK(same_data(d, back));
  save_csv(back, dir / "d2.csv");
  std::ifstream f1(dir / "d.csv"), f2(dir / "d2.csv");
  std::stringstream s1, s2;
  s1 << f1.rdbuf();
  s2 << f2.rdbuf();
  CHECK(s1.str() == s2.str());
}

TEST_CASE("hand-written three-row csv infers its dimension") {
  std::istringstream in("f0,f1,y,a\n0.5,-1,1,0\n2,3.25,0,1\n1e-3,0,1,1\n");
  const auto d = parse_csv(in);
  CHECK(d.size() == 3);
  CHECK(d.dim() == 2);
  CHECK(d.features(0, 1) == -1.0);
  CHECK(d.features(2, 0) == 1e-3);
  CHECK(d.labels == std::vector<std::uint8_t>{1, 0, 1});
  CHECK(d.attrs == std::vector<std::uint8_t>{0, 1, 1});
}

TEST_CASE("a bad label in data row 7 is reported as row 7") {
  std::string text = "f0,y,a\n";
  for (int r = 1; r <= 8; ++r) text += "0.1," + std::string(r == 7 ? "2" : "1") + ",0\n";
  std::istringstream in(text);
  try {
    parse_csv(in);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.row() == 7);
    CHECK(std::string(e.what()).find("row 7") != std::string::npos);
  }
}

TEST_CASE("malformed csv headers and numbers are rejected") {
  std::istringstream bad_header("x0,y,a\n1,0,0\n");
  CHECK_THROWS_AS(parse_csv(bad_header), ParseError);
  std::istringstream bad_number("f0,y,a\n1,0,0\nabc,1,1\n");
  try {
    parse_csv(bad_number);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.row() == 2);
  }
  std::istringstream short_row("f0,f1,y,a\n1,0,0\n");
  CHECK_THROWS_AS(parse_csv(short_row), ParseError);
}

TEST_CASE("subset keeps the requested rows in order") {
  const auto d = balanced(3);
  const std::vector<std::size_t> rows{5, 0, 11};
  const auto s = d.subset(rows);
  CHECK(s.size() == 3);
  CHECK(s.features(0, 0) == 5.0);
  CHECK(s.features(2, 0) == 11.0);
  CHECK(s.labels[2] == d.labels[11]);
}
