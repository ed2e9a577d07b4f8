#include <algorithm>
#include <cmath>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <doctest.h>

#include "mces/config.hpp"
#include "mces/csv.hpp"
#include "mces/error.hpp"
#include "mces/harness.hpp"

using namespace mces;
namespace fs = std::filesystem;

namespace {

const char* kTiny = R"(
[experiment]
runs = 1
seed = 3
[synthetic]
lakes = 8
years = 1
observation_rate = 0.1
[model]
embed_dim = 2
hidden = 4
window = 30
stride = 30
[mces]
n = 2
tau = 2
ep = 2
max_iterations = 4
patience = 0
batch_size = 2
[refine]
epochs = 1
batch_size = 4
)";

ExperimentConfig tiny(Variant v, const char* out) {
  ExperimentConfig c = parse_config(kTiny);
  c.variant = v;
  c.out_dir = fs::temp_directory_path() / "mces_unit" / out;
  fs::remove_all(c.out_dir);
  return c;
}

}  // namespace

TEST_CASE("config: defaults and overrides") {
  const ExperimentConfig d = default_config();
  CHECK(d.mces.n == 4);
  CHECK(d.mces.lambda == 0.2);
  CHECK(d.mces.sigma == 0.5);
  CHECK(d.mces.tau == 10);
  CHECK(d.mces.ep == 10);
  CHECK(d.refine.rho == 0.1);
  CHECK(d.model.grda_beta.c == 0.5);
  CHECK(d.model.grda_beta.mu == 0.8);

  const ExperimentConfig c = parse_config(kTiny);
  CHECK(c.runs == 1);
  CHECK(c.seed == 3);
  CHECK(c.mces.seed == 3);
  CHECK(c.synthetic.lakes == 8);
  CHECK(c.window == 30);
  CHECK(c.model.hidden == 4);
  CHECK(c.split.train_begin < c.split.train_end);
  CHECK(c.split.validation_end < c.split.test_end);
}

TEST_CASE("config: unknown names and bad values are rejected") {
  CHECK_THROWS_AS(parse_config("[mces]\nbogus = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[nowhere]\nn = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[mces]\ntau = 0\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[mces]\nsigma = 1.5\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[mces]\nn = four\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[experiment]\nvariant = half\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[split]\ntrain_begin = 2016-01-01\ntrain_end = 2015-01-01\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[model\n"), ConfigError);
}

TEST_CASE("config: variant names") {
  for (Variant v : {Variant::kFull, Variant::kNoRefine, Variant::kNoMulti, Variant::kNoInter}) {
    CHECK(parse_variant(variant_name(v)) == v);
  }
}

TEST_CASE("rmse: examples") {
  const std::vector<double> p{1, 2, 3, 4};
  const std::vector<std::optional<double>> same{1.0, 2.0, 3.0, 4.0};
  CHECK(rmse(p, same) == 0.0);
  const std::vector<std::optional<double>> some{std::nullopt, 5.0, std::nullopt, 0.0};
  CHECK(rmse(p, some) == doctest::Approx(std::sqrt((9.0 + 16.0) / 2.0)));
  const std::vector<std::optional<double>> none(4);
  CHECK_THROWS_AS(rmse(p, none), DataError);
  CHECK_THROWS_AS(rmse(p, std::vector<std::optional<double>>(3, 1.0)), ConfigError);
}

TEST_CASE("mean_std: sample deviation") {
  const std::vector<double> v{2, 4, 4, 4, 5, 5, 7, 9};
  const auto [mean, sd] = mean_std(v);
  CHECK(mean == 5.0);
  CHECK(sd == doctest::Approx(std::sqrt(32.0 / 7.0)));
  CHECK(mean_std(std::vector<double>{3.0}).second == 0.0);
}

TEST_CASE("random_selection keeps alpha and the beta values") {
  Rng rng(1);
  Genome g = init_genome(6, rng);
  for (std::size_t k = 0; k < g.pairs(); ++k) g.beta[k] = k % 3 == 0 ? 0.0 : 0.1 * static_cast<double>(k);
  for (int trial = 0; trial < 20; ++trial) {
    const Genome r = random_selection(g, rng);
    CHECK(r.alpha == g.alpha);
    std::vector<double> a = g.beta, b = r.beta;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    CHECK(a == b);
  }
}

TEST_CASE("render_gene_map: CSV round trip and PPM") {
  Rng rng(2);
  Genome g = init_genome(4, rng);
  g.beta[2] = 0.0;
  const GeneMap m = gene_map(g, {"a", "b", "c", "d"});
  const fs::path dir = fs::temp_directory_path() / "mces_unit" / "render";
  fs::create_directories(dir);
  render_gene_map(m, dir / "map.csv", MapFormat::kCsv);
  const GeneMap back = parse_gene_map_csv(csv::read_text(dir / "map.csv"));
  CHECK(back.codes == m.codes);
  render_gene_map(m, dir / "map.ppm", MapFormat::kImage);
  CHECK(csv::read_text(dir / "map.ppm").rfind("P6\n", 0) == 0);
}

TEST_CASE("prepare: balanced typing and training windows") {
  const ExperimentConfig cfg = tiny(Variant::kFull, "prepare");
  const Benchmark data = load_data(cfg);
  CHECK(data.lakes.size() == 8);
  const Prepared prep = prepare(cfg, data);
  for (LakeType t : kLakeTypes) CHECK(std::count(prep.lake_type.begin(), prep.lake_type.end(), t) == 2);
  const std::vector<PopulationData> pops = build_populations(cfg, prep);
  CHECK(pops.size() == 8);
  for (const PopulationData& p : pops) {
    CHECK(!p.train.empty());
    CHECK(!p.validation.empty());
    for (const Window& w : p.train) CHECK(prep.lake_type[w.lake] == p.id.type);
  }
}

TEST_CASE("run_experiment: full variant report and determinism") {
  const ExperimentConfig cfg = tiny(Variant::kFull, "full");
  const Benchmark data = load_data(cfg);
  const Report a = run_experiment(cfg, data);
  CHECK(a.rows.size() == 8);
  CHECK(a.runs.size() == 1);
  CHECK(a.runs[0].populations.size() == 8);
  for (const ReportRow& r : a.rows) {
    CHECK(std::isfinite(r.rmse_mean));
    CHECK(r.sim_rmse_mean > 0.0);
  }
  CHECK(fs::exists(cfg.out_dir / "report.csv"));
  CHECK(fs::exists(cfg.out_dir / "runs.csv"));
  CHECK(fs::exists(cfg.out_dir / "lake_types.csv"));
  CHECK(fs::exists(cfg.out_dir / "events" / "run0.tsv"));

  RunOptions quiet;
  quiet.write_outputs = false;
  const Report b = run_experiment(cfg, data, quiet);
  CHECK(b.runs_csv() == a.runs_csv());
  CHECK(b.csv() == a.csv());
}

TEST_CASE("run_experiment: -inter has no inter events, -multi has two populations") {
  RunOptions quiet;
  quiet.write_outputs = false;
  const ExperimentConfig no_inter = tiny(Variant::kNoInter, "no_inter");
  const Benchmark data = load_data(no_inter);
  const Report r = run_experiment(no_inter, data, quiet);
  const auto& ev = r.runs[0].events;
  CHECK(std::none_of(ev.begin(), ev.end(), [](const Event& e) { return e.kind == "inter"; }));

  const Report full = run_experiment(tiny(Variant::kFull, "full_events"), data, quiet);
  const auto& fev = full.runs[0].events;
  CHECK(std::any_of(fev.begin(), fev.end(), [](const Event& e) { return e.kind == "inter"; }));

  const Report multi = run_experiment(tiny(Variant::kNoMulti, "no_multi"), data, quiet);
  REQUIRE(multi.runs[0].populations.size() == 2);
  CHECK(multi.runs[0].populations[0].id.type == LakeType::kAll);
  CHECK(multi.rows.size() == 8);
}

TEST_CASE("run_experiment: -refine skips refinement") {
  RunOptions quiet;
  quiet.write_outputs = false;
  const ExperimentConfig cfg = tiny(Variant::kNoRefine, "no_refine");
  const Report r = run_experiment(cfg, load_data(cfg), quiet);
  CHECK(!r.refined);
}
