#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <vector>

#include <doctest.h>

#include "mces/csv.hpp"
#include "mces/error.hpp"
#include "mces/features.hpp"
#include "mces/simlake.hpp"
#include "mces/tape.hpp"

using namespace mces;
namespace fs = std::filesystem;
using namespace std::chrono;

namespace {

// Linear-interpolated quantile of a sorted array at position q (0..1).
double quantile(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

FeatureSchema two_fields() {
  return FeatureSchema({{"temp", FieldKind::kNumeric, 4}, {"kind", FieldKind::kCategorical, 2}});
}

fs::path scratch(const char* name) {
  const fs::path p = fs::temp_directory_path() / "mces_unit" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

const char* kThreeDays =
    "date,temp,kind,sim_epi,sim_hyp,obs_epi,obs_hyp\n"
    "2020-06-01,12.5,0,8.1,6.0,8.3,\n"
    "2020-06-02,13.0,1,8.0,5.9,,\n"
    "2020-06-03,13.5,1,7.9,5.8,,5.5\n";

}  // namespace

TEST_CASE("fit_buckets: quantile edges on 1..100") {
  std::vector<double> v;
  for (int i = 1; i <= 100; ++i) v.push_back(i);
  const std::vector<double> edges = fit_buckets(v, 4);
  REQUIRE(edges.size() == 3);
  CHECK(edges[0] == doctest::Approx(25.75));
  CHECK(edges[1] == doctest::Approx(50.5));
  CHECK(edges[2] == doctest::Approx(75.25));
  CHECK(bucketize(50.6, edges) == 2);
  CHECK(bucketize(-1e9, edges) == 0);
  CHECK(bucketize(1e9, edges) == 3);
}

TEST_CASE("fit_buckets: median split and constant series") {
  const std::vector<double> edges = fit_buckets({4, 1, 3, 2}, 2);
  REQUIRE(edges.size() == 1);
  CHECK(edges[0] == doctest::Approx(2.5));
  CHECK(bucketize(1, edges) == 0);
  CHECK(bucketize(2, edges) == 0);
  CHECK(bucketize(3, edges) == 1);
  CHECK(bucketize(4, edges) == 1);

  const std::vector<double> none = fit_buckets({7, 7, 7, 7}, 4);
  CHECK(none.empty());
  CHECK(bucketize(7, none) == 0);
}

TEST_CASE("fit_buckets: random data matches the sorted-array oracle") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> v(50 + trial);
    for (double& x : v) x = gaussian(rng, 0.0, 3.0);
    const int k = 2 + trial % 8;
    const std::vector<double> edges = fit_buckets(v, k);
    std::sort(v.begin(), v.end());
    REQUIRE(edges.size() == static_cast<std::size_t>(k - 1));
    for (int q = 1; q < k; ++q) CHECK(edges[q - 1] == doctest::Approx(quantile(v, double(q) / k)).epsilon(1e-12));
  }
}

TEST_CASE("bucketize: NaN is a data error") {
  const std::vector<double> edges{1.0};
  CHECK_THROWS_AS(bucketize(std::nan(""), edges), DataError);
}

TEST_CASE("schema: text round trip and hash") {
  const FeatureSchema s = two_fields();
  const FeatureSchema t = FeatureSchema::parse(s.to_text());
  CHECK(t.names() == s.names());
  CHECK(t.hash() == s.hash());
  CHECK(t.field(1).kind == FieldKind::kCategorical);
  FeatureSchema wider({{"temp", FieldKind::kNumeric, 5}, {"kind", FieldKind::kCategorical, 2}});
  CHECK(wider.hash() != s.hash());
  CHECK_THROWS_AS(FeatureSchema::parse("name=a kind=bogus buckets=3\n"), ConfigError);
}

TEST_CASE("embed: lookup aliases the table") {
  const FeatureSchema s({{"a", FieldKind::kCategorical, 2}, {"b", FieldKind::kCategorical, 2}});
  EmbeddingTable t(s, 2);
  t.table(0).value = Matrix::Identity(2, 2);
  const auto row = embed(0, 1, t);
  CHECK(row[0] == 0.0);
  CHECK(row[1] == 1.0);
  CHECK(embed(0, 1, t).data() == row.data());
  CHECK_THROWS(embed(0, 2, t));
}

TEST_CASE("embedding gradients reach only the looked-up rows") {
  Tensor table(Matrix{{1.0, 2.0}, {3.0, 4.0}, {5.0, 6.0}});
  Tape tape;
  const Var rows = tape.gather_rows(table, {2, 0, 2});
  tape.backward(tape.sum(rows));
  CHECK(table.grad == Matrix{{1.0, 1.0}, {0.0, 0.0}, {2.0, 2.0}});
}

TEST_CASE("load_dataset: three-day file") {
  const fs::path dir = scratch("three_days");
  csv::write_text(dir / "lake.csv", kThreeDays);
  const LakeDataset d = load_dataset(dir / "lake.csv", two_fields());
  CHECK(d.days() == 3);
  CHECK(d.features(2, 0) == 13.5);
  CHECK(d.obs_epi[0] == 8.3);
  CHECK(!d.obs_epi[1]);
  CHECK(d.observed_count(Task::kHyp) == 1);
}

TEST_CASE("load_dataset: date gap and negative DO are rejected") {
  const fs::path dir = scratch("bad_days");
  std::string gap = kThreeDays;
  gap.replace(gap.find("2020-06-03"), 10, "2020-06-05");
  csv::write_text(dir / "gap.csv", gap);
  CHECK_THROWS_WITH_AS(load_dataset(dir / "gap.csv", two_fields()), doctest::Contains("2020-06-05"), DataError);

  std::string neg = kThreeDays;
  neg.replace(neg.find("8.3"), 3, "-1.0");
  csv::write_text(dir / "neg.csv", neg);
  CHECK_THROWS_AS(load_dataset(dir / "neg.csv", two_fields()), DataError);
}

TEST_CASE("synthetic lake files round-trip") {
  SyntheticConfig cfg;
  cfg.lakes = 4;
  cfg.years = 1;
  cfg.observation_rate = 0.1;
  const SyntheticBenchmark bench = gen_synthetic(cfg);
  const fs::path dir = scratch("roundtrip");
  bench.write(dir);
  const std::vector<LakeDataset> loaded = load_benchmark(dir / "metadata.csv", FeatureSchema::load(dir / "schema.txt"));
  REQUIRE(loaded.size() == bench.lakes.size());
  for (std::size_t i = 0; i < loaded.size(); ++i) {
    const LakeDataset& a = bench.lakes[i].data;
    const LakeDataset& b = loaded[i];
    CHECK(a.lake_id == b.lake_id);
    CHECK(a.dates == b.dates);
    CHECK(a.features == b.features);
    CHECK(a.sim_epi == b.sim_epi);
    CHECK(a.sim_hyp == b.sim_hyp);
    CHECK(a.obs_epi == b.obs_epi);
    CHECK(a.obs_hyp == b.obs_hyp);
    CHECK(a.area_m2 == b.area_m2);
  }
}

TEST_CASE("make_windows: counts and contents") {
  LakeDataset d;
  d.lake_id = "L";
  const sys_days start = sys_days{year{2020} / 1 / 1};
  d.features = Matrix(10, 1);
  std::vector<int> encoded;
  for (int t = 0; t < 10; ++t) {
    d.dates.push_back(start + days{t});
    d.features(t, 0) = t;
    d.sim_epi.push_back(t);
    d.sim_hyp.push_back(-t);
    d.obs_epi.push_back(t % 3 == 0 ? std::optional<double>(t + 0.5) : std::nullopt);
    d.obs_hyp.push_back(std::nullopt);
    encoded.push_back(t % 3);
  }
  CHECK(make_windows(d, encoded, 1, 5, 5).size() == 2);
  const std::vector<Window> w = make_windows(d, encoded, 1, 5, 1);
  REQUIRE(w.size() == 6);
  CHECK(w[3].start == 3);
  CHECK(w[3].bucket(1, 0) == 1);
  CHECK(w[3].sim_epi[4] == 7.0);
  CHECK(w[3].mask_epi == std::vector<std::uint8_t>{1, 0, 0, 1, 0});
  CHECK(w[3].obs_epi[3] == 6.5);
  CHECK(w[3].obs_epi[1] == 0.0);
  CHECK_THROWS(make_windows(d, encoded, 1, 11, 1));
}
