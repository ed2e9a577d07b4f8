#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include <doctest.h>

#include "mces/csv.hpp"
#include "mces/error.hpp"
#include "mces/laketypes.hpp"
#include "mces/simlake.hpp"

using namespace mces;

namespace {

std::vector<LakePoint> random_points(Rng& rng, std::size_t n) {
  std::vector<LakePoint> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back({"L" + std::to_string(i), uniform(rng, 4, 8), uniform(rng, 4, 10)});
  }
  return out;
}

std::vector<int> sizes(const ClusterAssignment& a) {
  std::vector<int> s(a.clusters(), 0);
  for (int c : a.cluster) ++s[static_cast<std::size_t>(c)];
  return s;
}

LakeParams still() {
  LakeParams p;
  p.k_temp = 0.0;
  p.k_temp_hyp = 0.0;
  p.k_atm = 0.0;
  p.k_sed = 0.0;
  p.nep_rate = 0.0;
  p.k_ent = 0.0;
  return p;
}

std::vector<DriverDay> seasonal_drivers(Rng& rng, int days) {
  std::vector<DriverDay> out;
  for (int d = 0; d < days; ++d) {
    const double phase = 2.0 * M_PI * (d % 365) / 365.0;
    out.push_back({12.0 - 14.0 * std::cos(phase) + gaussian(rng, 0, 1.5), std::max(0.0, gaussian(rng, 4, 2)),
                   std::clamp(0.5 - 0.4 * std::cos(phase) + gaussian(rng, 0, 0.1), 0.0, 1.0), d % 365 + 1});
  }
  return out;
}

}  // namespace

TEST_CASE("balanced_kmeans: separated pairs form the clusters") {
  const std::vector<LakePoint> pts{{"a", 1.0, 1.0}, {"b", 1.1, 1.0}, {"c", 5.0, 5.0}, {"d", 5.0, 5.1},
                                   {"e", 9.0, 3.0}, {"f", 9.1, 3.0}, {"g", 2.0, 9.0}, {"h", 2.0, 9.1}};
  Rng rng(1);
  const ClusterAssignment a = balanced_kmeans(pts, rng);
  CHECK(sizes(a) == std::vector<int>{2, 2, 2, 2});
  for (std::size_t i = 0; i < pts.size(); i += 2) CHECK(a.cluster[i] == a.cluster[i + 1]);
  // Ascending volume: (1,1) S, (9,3) M, (5,5) L, (2,9) xL.
  CHECK(a.type_of(0) == LakeType::kS);
  CHECK(a.type_of(4) == LakeType::kM);
  CHECK(a.type_of(2) == LakeType::kL);
  CHECK(a.type_of(6) == LakeType::kXL);
}

TEST_CASE("balanced_kmeans: four points are singletons; fewer is an error") {
  Rng rng(2);
  const std::vector<LakePoint> pts = random_points(rng, 4);
  const ClusterAssignment a = balanced_kmeans(pts, rng);
  CHECK(sizes(a) == std::vector<int>{1, 1, 1, 1});
  const std::vector<LakePoint> three(pts.begin(), pts.begin() + 3);
  CHECK_THROWS(balanced_kmeans(three, rng));
}

TEST_CASE("balanced_kmeans: balance, label order and determinism") {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const std::vector<LakePoint> pts = random_points(rng, static_cast<std::size_t>(uniform_int(rng, 4, 60)));
    const std::uint64_t seed = rng();
    Rng r1(seed), r2(seed);
    const ClusterAssignment a = balanced_kmeans(pts, r1);
    const std::vector<int> s = sizes(a);
    CHECK(*std::max_element(s.begin(), s.end()) - *std::min_element(s.begin(), s.end()) <= 1);
    for (std::size_t c = 1; c < a.centroids.size(); ++c) CHECK(a.centroids[c - 1][1] <= a.centroids[c][1]);
    CHECK(balanced_kmeans(pts, r2).cluster == a.cluster);
  }
}

TEST_CASE("balanced_kmeans: beats random balanced assignments") {
  Rng rng(4);
  const std::vector<LakePoint> pts = random_points(rng, 20);
  const ClusterAssignment a = balanced_kmeans(pts, rng);
  const double got = within_cluster_distance(pts, a.cluster, 4);
  std::vector<int> labels(20);
  for (std::size_t i = 0; i < 20; ++i) labels[i] = static_cast<int>(i % 4);
  double best_random = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 1000; ++i) {
    std::shuffle(labels.begin(), labels.end(), rng);
    best_random = std::min(best_random, within_cluster_distance(pts, labels, 4));
  }
  CHECK(got <= best_random);
}

TEST_CASE("lake points and assignment CSV") {
  CHECK(LakePoint::from_morphometry("x", 1e6, 1e7).log_volume == doctest::Approx(7.0));
  CHECK_THROWS_AS(LakePoint::from_morphometry("x", 0.0, 1e7), DataError);
  CHECK_THROWS_AS(LakePoint::from_morphometry("x", 1e6, std::nan("")), DataError);
  Rng rng(5);
  const std::vector<LakePoint> pts = random_points(rng, 9);
  const ClusterAssignment a = balanced_kmeans(pts, rng);
  const std::filesystem::path p = std::filesystem::temp_directory_path() / "mces_unit" / "types.csv";
  std::filesystem::create_directories(p.parent_path());
  write_assignment(p, a);
  const auto back = load_assignment(p);
  REQUIRE(back.size() == 9);
  for (std::size_t i = 0; i < 9; ++i) {
    CHECK(back[i].first == a.lake_ids[i]);
    CHECK(back[i].second == a.type_of(i));
  }
}

TEST_CASE("do_saturation: monotone, continuous, regression value") {
  CHECK(do_saturation(5.0) > do_saturation(25.0));
  CHECK(do_saturation(20.0) == doctest::Approx(9.092426042885567).epsilon(1e-12));
  for (double t = -5.0; t < 44.99; t += 0.01) CHECK(std::abs(do_saturation(t) - do_saturation(t + 0.01)) < 0.01);
  CHECK_THROWS_AS(do_saturation(46.0), DataError);
  CHECK_THROWS_AS(do_saturation(-6.0), DataError);
}

TEST_CASE("step_day: zero rates leave DO unchanged") {
  const LakeState s{7.5, 4.25, 20.0, 8.0, true};
  const LakeState n = step_day(s, {25.0, 6.0, 0.9, 180}, still());
  CHECK(n.do_epi == 7.5);
  CHECK(n.do_hyp == 4.25);
  CHECK(n.stratified);
}

TEST_CASE("step_day: sediment demand drains the stratified hypolimnion") {
  LakeParams p = still();
  p.k_sed = 0.3;
  LakeState s{8.0, 2.0, 22.0, 6.0, true};
  double prev = s.do_hyp;
  bool hit_zero = false;
  for (int d = 0; d < 30; ++d) {
    s = step_day(s, {22.0, 3.0, 0.5, 180 + d}, p);
    CHECK(s.stratified);
    if (prev > 0.0) {
      CHECK(s.do_hyp < prev);
    } else {
      CHECK(s.do_hyp == 0.0);
    }
    hit_zero = hit_zero || s.do_hyp == 0.0;
    prev = s.do_hyp;
  }
  CHECK(hit_zero);
}

TEST_CASE("step_day: saturated surface has no exchange") {
  LakeParams p = still();
  p.k_atm = 0.05;
  const LakeState s{do_saturation(20.0), 5.0, 20.0, 6.0, true};
  FluxSet f;
  step_day(s, {20.0, 5.0, 0.5, 200}, p, &f);
  CHECK(f.atm == 0.0);
  CHECK(f.nep == 0.0);
}

TEST_CASE("step_day: non-finite drivers are rejected") {
  CHECK_THROWS_AS(step_day(initial_state(), {std::nan(""), 1.0, 0.5, 1}, LakeParams{}), DataError);
  CHECK_THROWS_AS(step_day(initial_state(), {10.0, INFINITY, 0.5, 1}, LakeParams{}), DataError);
}

TEST_CASE("simulate: one day equals step_day") {
  const DriverDay d{18.0, 4.0, 0.7, 150};
  const LakeParams p;
  FluxSet f;
  const LakeState s = step_day(initial_state(), d, p, &f);
  const Simulation sim = simulate(p, {d}, initial_state());
  REQUIRE(sim.states.size() == 1);
  CHECK(sim.states[0].do_epi == s.do_epi);
  CHECK(sim.states[0].do_hyp == s.do_hyp);
  CHECK(sim.fluxes[0].net_epi == f.net_epi);
}

TEST_CASE("simulate: identical years repeat") {
  Rng rng(6);
  const std::vector<DriverDay> year = seasonal_drivers(rng, 365);
  const Simulation a = simulate(LakeParams{}, year, initial_state());
  const Simulation b = simulate(LakeParams{}, year, initial_state());
  CHECK(a.epi() == b.epi());
  CHECK(a.hyp() == b.hyp());
}

TEST_CASE("simulate: mass bookkeeping, non-negativity, hypolimnion isolation") {
  Rng rng(7);
  for (int trial = 0; trial < 5; ++trial) {
    LakeParams p;
    p.k_sed = uniform(rng, 0.1, 0.6);
    p.epi_fraction = uniform(rng, 0.3, 0.7);
    const std::vector<DriverDay> drivers = seasonal_drivers(rng, 730);
    const Simulation sim = simulate(p, drivers, initial_state());
    LakeState prev = initial_state();
    double sum_epi = 0.0;
    double sum_hyp = 0.0;
    for (std::size_t d = 0; d < sim.states.size(); ++d) {
      const LakeState& s = sim.states[d];
      const FluxSet& f = sim.fluxes[d];
      CHECK(s.do_epi >= 0.0);
      CHECK(s.do_hyp >= 0.0);
      CHECK(f.sed >= 0.0);
      CHECK(s.do_epi - prev.do_epi == doctest::Approx(f.net_epi).epsilon(1e-12));
      CHECK(s.do_hyp - prev.do_hyp == doctest::Approx(f.net_hyp).epsilon(1e-12));
      if (prev.stratified && s.stratified) CHECK(s.do_hyp <= prev.do_hyp);
      sum_epi += f.net_epi;
      sum_hyp += f.net_hyp;
      prev = s;
    }
    CHECK(std::abs(sim.states.back().do_epi - initial_state().do_epi - sum_epi) < 1e-9);
    CHECK(std::abs(sim.states.back().do_hyp - initial_state().do_hyp - sum_hyp) < 1e-9);
  }
}

TEST_CASE("simulate: stratified periods are contiguous within a year") {
  Rng rng(8);
  const Simulation sim = simulate(LakeParams{}, seasonal_drivers(rng, 365), initial_state());
  int onsets = 0;
  for (std::size_t d = 1; d < sim.states.size(); ++d) onsets += sim.states[d].stratified && !sim.states[d - 1].stratified;
  CHECK(onsets == 1);
}

TEST_CASE("gen_synthetic: observation rates") {
  SyntheticConfig cfg;
  cfg.lakes = 10;
  cfg.years = 1;
  cfg.observation_rate = 1.0;
  for (const SyntheticLake& l : gen_synthetic(cfg).lakes) {
    CHECK(l.data.observed_count(Task::kEpi) == l.data.days());
    CHECK(l.data.observed_count(Task::kHyp) == l.data.days());
  }

  cfg.observation_rate = 0.02;
  cfg.seed = 17;
  const SyntheticBenchmark b = gen_synthetic(cfg);
  for (Task task : {Task::kEpi, Task::kHyp}) {
    double n = 0.0;
    double count = 0.0;
    for (const SyntheticLake& l : b.lakes) {
      n += static_cast<double>(l.data.days());
      count += static_cast<double>(l.data.observed_count(task));
    }
    const double sd = std::sqrt(n * 0.02 * 0.98);
    CHECK(std::abs(count - 0.02 * n) <= 3.0 * sd);
  }

  cfg.observation_rate = 0.0;
  CHECK_THROWS_AS(gen_synthetic(cfg), ConfigError);
}

TEST_CASE("gen_synthetic: same seed, same files") {
  SyntheticConfig cfg;
  cfg.lakes = 4;
  cfg.years = 1;
  const std::filesystem::path root = std::filesystem::temp_directory_path() / "mces_unit" / "gen";
  std::filesystem::remove_all(root);
  gen_synthetic(cfg).write(root / "a");
  gen_synthetic(cfg).write(root / "b");
  for (const auto& e : std::filesystem::recursive_directory_iterator(root / "a")) {
    if (!e.is_regular_file()) continue;
    const auto rel = std::filesystem::relative(e.path(), root / "a");
    CHECK(csv::read_text(e.path()) == csv::read_text(root / "b" / rel));
  }
}

TEST_CASE("gen_synthetic: simulator differs from truth, observations follow truth") {
  SyntheticConfig cfg;
  cfg.lakes = 4;
  cfg.years = 1;
  cfg.observation_rate = 1.0;
  cfg.observation_noise = 1e-9;
  for (const SyntheticLake& l : gen_synthetic(cfg).lakes) {
    CHECK(l.data.sim_epi != l.truth_epi);
    for (std::size_t d = 0; d < l.data.days(); ++d) CHECK(*l.data.obs_hyp[d] == doctest::Approx(l.truth_hyp[d]));
  }
}

TEST_CASE("gen_planted: label is the planted product") {
  PlantedConfig cfg;
  cfg.noise = 1e-9;
  cfg.lakes = 2;
  cfg.days = 50;
  const SyntheticBenchmark b = gen_planted(cfg);
  CHECK(b.schema.size() == cfg.fields);
  for (const SyntheticLake& l : b.lakes) {
    for (std::size_t d = 0; d < l.data.days(); ++d) {
      const double z = l.data.features(d, cfg.pair_a) * l.data.features(d, cfg.pair_b);
      CHECK(l.data.sim_epi[d] == doctest::Approx(cfg.offset + cfg.scale * z));
    }
  }
}
