#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "fedclaims/data.hpp"
#include "fedclaims/error.hpp"
#include "fedclaims/rng.hpp"

using namespace fedclaims;

namespace {

TweedieParams zero_signal(double lambda0, double shape, double scale,
                          std::size_t p, std::uint64_t seed) {
  TweedieParams params;
  params.base_frequency = lambda0;
  params.frequency_coefficients.assign(p, 0.0);
  params.severity_shape = shape;
  params.severity_scale = scale;
  params.seed = seed;
  return params;
}

std::string temp_path(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("rng: distributions hit textbook moments") {
  Xoshiro256 rng(11);
  // Normal: mean ~0, var ~1.
  double sum = 0.0, sq = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    sum += x;
    sq += x * x;
  }
  CHECK(std::abs(sum / n) < 0.01);
  CHECK(std::abs(sq / n - 1.0) < 0.02);

  // Gamma(3, 2): mean 6, var 12.
  sum = 0.0;
  sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double g = rng.gamma(3.0, 2.0);
    CHECK(g > 0.0);
    sum += g;
    sq += g * g;
  }
  const double mean = sum / n;
  CHECK(std::abs(mean - 6.0) < 0.05);
  CHECK(std::abs((sq / n - mean * mean) - 12.0) < 0.3);

  // Gamma shape < 1 branch.
  sum = 0.0;
  for (int i = 0; i < n; ++i) sum += rng.gamma(0.5, 1.0);
  CHECK(std::abs(sum / n - 0.5) < 0.02);

  // Poisson(4): mean 4, var 4.
  sum = 0.0;
  sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double k = rng.poisson(4.0);
    sum += k;
    sq += k * k;
  }
  CHECK(std::abs(sum / n - 4.0) < 0.05);
  CHECK(std::abs((sq / n - (sum / n) * (sum / n)) - 4.0) < 0.15);
  CHECK(rng.poisson(0.0) == 0);
}

TEST_CASE("rng: seeded determinism and shuffle") {
  Xoshiro256 a(7), b(7);
  for (int i = 0; i < 1000; ++i) CHECK(a.next() == b.next());

  const auto idx1 = shuffled_indices(100, 5);
  const auto idx2 = shuffled_indices(100, 5);
  CHECK(idx1 == idx2);
  CHECK(idx1 != shuffled_indices(100, 6));
  auto sorted = idx1;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i) CHECK(sorted[i] == i);
}

TEST_CASE("generate: empty and near-zero-frequency cases") {
  const auto empty = generate_tweedie(0, 3, zero_signal(1.0, 2.0, 100.0, 3, 1));
  CHECK(empty.n() == 0);
  CHECK(empty.p() == 3);
  CHECK(!empty.has_labels());

  // lambda -> 0+: claim probability ~1e-12 per row, so 1000 rows are all
  // zero-loss except with probability ~1e-9.
  const auto rare = generate_tweedie(1000, 2, zero_signal(1e-12, 2.0, 100.0, 2, 3));
  REQUIRE(rare.has_labels());
  std::size_t zeros = 0;
  for (double s : *rare.labels) zeros += s == 0.0 ? 1 : 0;
  CHECK(zeros >= 999);
}

TEST_CASE("generate: aggregate mean matches lambda*k*theta") {
  // E[S] = E[N]E[Y] = 2 * 200 = 400; Var[S] = lambda*k*(k+1)*theta^2.
  const std::size_t n = 50000;
  const auto ds = generate_tweedie(n, 2, zero_signal(2.0, 2.0, 100.0, 2, 42));
  double sum = 0.0;
  for (double s : *ds.labels) {
    CHECK(s >= 0.0);
    sum += s;
  }
  const double mean = sum / static_cast<double>(n);
  const double se = std::sqrt(2.0 * 2.0 * 3.0 * 100.0 * 100.0 / static_cast<double>(n));
  CHECK(std::abs(mean - 400.0) < 3.0 * se);
}

TEST_CASE("generate: zero-loss fraction rises as base frequency falls") {
  const std::size_t n = 50000;
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    const auto low = generate_tweedie(n, 1, zero_signal(0.05, 2.0, 100.0, 1, seed));
    const auto high = generate_tweedie(n, 1, zero_signal(0.5, 2.0, 100.0, 1, seed));
    const auto zero_fraction = [](const TabularDataset& ds) {
      std::size_t zeros = 0;
      for (double s : *ds.labels) zeros += s == 0.0 ? 1 : 0;
      return static_cast<double>(zeros) / static_cast<double>(ds.n());
    };
    CHECK(zero_fraction(low) > zero_fraction(high));
  }
}

TEST_CASE("generate: determinism and validation") {
  const auto params = zero_signal(0.5, 2.0, 50.0, 4, 77);
  const auto a = generate_tweedie(500, 4, params);
  const auto b = generate_tweedie(500, 4, params);
  CHECK(a == b);

  CHECK_THROWS_AS(generate_tweedie(10, 2, zero_signal(-1.0, 2.0, 1.0, 2, 0)), Error);
  CHECK_THROWS_AS(generate_tweedie(10, 2, zero_signal(1.0, 0.0, 1.0, 2, 0)), Error);
  CHECK_THROWS_AS(generate_tweedie(10, 3, zero_signal(1.0, 1.0, 1.0, 2, 0)), Error);
}

TEST_CASE("horizontal_split: partitions rows exactly") {
  const auto ds = generate_tweedie(10, 2, zero_signal(0.5, 2.0, 100.0, 2, 9));
  PartitionSpec whole{PartitionKind::Horizontal, {1.0}, {}, 0};
  const auto single = horizontal_split(ds, whole, 123);
  REQUIRE(single.size() == 1);
  CHECK(single[0].n() == 10);
  auto ids = single[0].entity_ids;
  std::sort(ids.begin(), ids.end());
  CHECK(ids == ds.entity_ids);  // a permutation of the input rows

  PartitionSpec halves{PartitionKind::Horizontal, {0.5, 0.5}, {}, 0};
  const auto parts = horizontal_split(ds, halves, 123);
  REQUIRE(parts.size() == 2);
  CHECK(parts[0].n() == 5);
  CHECK(parts[1].n() == 5);
  std::set<std::uint64_t> seen;
  for (const auto& part : parts) {
    for (auto id : part.entity_ids) CHECK(seen.insert(id).second);
  }
  CHECK(seen.size() == 10);

  const auto again = horizontal_split(ds, halves, 123);
  CHECK(again[0] == parts[0]);
  CHECK(again[1] == parts[1]);

  PartitionSpec bad{PartitionKind::Horizontal, {0.6, 0.6}, {}, 0};
  CHECK_THROWS_AS(horizontal_split(ds, bad, 1), Error);
}

TEST_CASE("horizontal_split: labels travel with rows") {
  const auto ds = generate_tweedie(100, 2, zero_signal(1.0, 2.0, 10.0, 2, 5));
  PartitionSpec spec{PartitionKind::Horizontal, {0.3, 0.7}, {}, 0};
  const auto parts = horizontal_split(ds, spec, 99);
  for (const auto& part : parts) {
    REQUIRE(part.has_labels());
    for (std::size_t i = 0; i < part.n(); ++i) {
      const auto original = std::find(ds.entity_ids.begin(), ds.entity_ids.end(),
                                      part.entity_ids[i]) -
                            ds.entity_ids.begin();
      CHECK((*part.labels)[i] == (*ds.labels)[original]);
      for (std::size_t j = 0; j < ds.p(); ++j) {
        CHECK(part.features(i, j) ==
              ds.features(static_cast<std::size_t>(original), j));
      }
    }
  }
}

TEST_CASE("vertical_split: column partition preserves row order") {
  const auto ds = generate_tweedie(50, 5, zero_signal(1.0, 2.0, 10.0, 5, 6));

  PartitionSpec degenerate{PartitionKind::Vertical,
                           {},
                           {{"f1", "f2", "f3", "f4", "f5"}},
                           0};
  const auto whole = vertical_split(ds, degenerate);
  REQUIRE(whole.size() == 1);
  CHECK(whole[0] == ds);

  PartitionSpec spec{PartitionKind::Vertical, {}, {{"f1", "f2"}, {"f3", "f4", "f5"}}, 0};
  const auto parts = vertical_split(ds, spec);
  REQUIRE(parts.size() == 2);
  CHECK(parts[0].p() == 2);
  CHECK(parts[1].p() == 3);
  CHECK(parts[0].entity_ids == ds.entity_ids);
  CHECK(parts[1].entity_ids == ds.entity_ids);
  CHECK(parts[0].has_labels());
  CHECK(!parts[1].has_labels());

  PartitionSpec overlap{PartitionKind::Vertical, {}, {{"f1", "f2"}, {"f2", "f3", "f4", "f5"}}, 0};
  CHECK_THROWS_AS(vertical_split(ds, overlap), Error);
  PartitionSpec missing{PartitionKind::Vertical, {}, {{"f1"}, {"f3", "f4", "f5"}}, 0};
  CHECK_THROWS_AS(vertical_split(ds, missing), Error);
}

TEST_CASE("standardize: population sigma, constant columns, idempotent stats") {
  TabularDataset train;
  train.entity_ids = {1, 2};
  train.feature_names = {"a", "b"};
  train.features = Matrix(2, 2);
  train.features(0, 0) = 0.0;
  train.features(1, 0) = 2.0;
  train.features(0, 1) = 5.0;  // constant column
  train.features(1, 1) = 5.0;

  const auto stats = standardization_stats(train);
  CHECK(stats.mean == std::vector<double>{1.0, 5.0});
  CHECK(stats.stddev == std::vector<double>{1.0, 0.0});

  const auto scaled = apply_standardization(train, stats);
  CHECK(scaled.features(0, 0) == -1.0);
  CHECK(scaled.features(1, 0) == 1.0);
  CHECK(scaled.features(0, 1) == 0.0);
  CHECK(scaled.features(1, 1) == 0.0);

  // Applying recorded stats to train reproduces the standardized train.
  TabularDataset copy = train;
  const auto stats2 = standardize(copy, {});
  CHECK(copy == scaled);
  CHECK(stats2.mean == stats.mean);
  CHECK(apply_standardization(train, stats2) == copy);

  TabularDataset other = train;
  other.feature_names = {"a", "c"};
  TabularDataset base = train;
  CHECK_THROWS_AS(standardize(base, {&other}), Error);
}

TEST_CASE("csv: round trip preserves everything") {
  const auto ds = generate_tweedie(25, 3, zero_signal(1.0, 2.0, 100.0, 3, 8));
  const auto path = temp_path("fedclaims_roundtrip.csv");
  save_csv(ds, path);
  const auto loaded = load_csv(path);
  CHECK(loaded == ds);
  std::filesystem::remove(path);
}

TEST_CASE("csv: optional labels and ingestion errors") {
  const auto path = temp_path("fedclaims_csv_case.csv");
  {
    std::ofstream out(path);
    out << "entity_id,f1,f2\n1,0.5,1.5\n2,-1,2\n";
  }
  const auto unlabeled = load_csv(path);
  CHECK(!unlabeled.has_labels());
  CHECK(unlabeled.n() == 2);
  CHECK(unlabeled.feature_names == std::vector<std::string>{"f1", "f2"});

  {
    std::ofstream out(path);
    out << "entity_id,f1,loss\n7,0.5,10\n7,1.5,20\n";
  }
  try {
    load_csv(path);
    FAIL("expected duplicate entity_id error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("7") != std::string::npos);
  }

  {
    std::ofstream out(path);
    out << "entity_id,f1,loss\n1,abc,10\n";
  }
  try {
    load_csv(path);
    FAIL("expected unparsable-cell error");
  } catch (const Error& e) {
    const std::string what = e.what();
    CHECK(what.find("row 1") != std::string::npos);
    CHECK(what.find("f1") != std::string::npos);
  }

  {
    std::ofstream out(path);
    out << "policy,f1\n1,2\n";
  }
  CHECK_THROWS_AS(load_csv(path), Error);
  std::filesystem::remove(path);
}

TEST_CASE("csv: 17 significant digits survive") {
  TabularDataset ds;
  ds.entity_ids = {0};
  ds.feature_names = {"x"};
  ds.features = Matrix(1, 1);
  ds.features(0, 0) = 0.1234567890123456789;  // not representable; nearest double
  ds.labels = std::vector<double>{3.0000000000000004};
  const auto path = temp_path("fedclaims_digits.csv");
  save_csv(ds, path);
  const auto loaded = load_csv(path);
  CHECK(loaded.features(0, 0) == ds.features(0, 0));
  CHECK((*loaded.labels)[0] == (*ds.labels)[0]);
  std::filesystem::remove(path);
}
