// mces command-line front end.
#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/core.h>

#include "mces/config.hpp"
#include "mces/csv.hpp"
#include "mces/error.hpp"
#include "mces/harness.hpp"
#include "mces/log.hpp"

namespace fs = std::filesystem;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  std::optional<std::string> variant;
  std::optional<std::string> out;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "experiment config (INI); defaults apply when omitted");
  cmd->add_option("--seed", c.seed, "master seed");
  cmd->add_option("--threads", c.threads, "worker threads for the population pool")->check(CLI::PositiveNumber);
  cmd->add_option("--variant", c.variant, "full, -refine, -multi or -inter");
  cmd->add_option("--out", c.out, "output directory");
}

mces::ExperimentConfig resolve(const Common& c) {
  mces::ExperimentConfig cfg = c.config.empty() ? mces::default_config() : mces::load_config(c.config);
  if (c.seed) {
    cfg.seed = *c.seed;
    cfg.mces.seed = *c.seed;
  }
  if (c.threads) {
    cfg.threads = *c.threads;
    cfg.mces.threads = *c.threads;
  }
  if (c.variant) cfg.variant = mces::parse_variant(*c.variant);
  if (c.out) cfg.out_dir = *c.out;
  cfg.validate();
  return cfg;
}

void print_report(const mces::Report& report) {
  std::cout << report.csv();
}

int run(int argc, char** argv) {
  CLI::App app{"Multi-population evolutionary search for feature interactions in lake DO prediction"};
  app.require_subcommand(1);
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "warnings and errors only");

  Common common;
  auto* generate = app.add_subcommand("generate", "write the synthetic (or planted) benchmark to --out");
  auto* cluster = app.add_subcommand("cluster", "assign lakes to S/M/L/xL types");
  auto* search = app.add_subcommand("search", "MCES stage only; saves best models under <out>/models");
  auto* refine = app.add_subcommand("refine", "refine and evaluate models saved by search");
  auto* run_cmd = app.add_subcommand("run", "full pipeline: cluster, search, refine, evaluate");
  auto* ablate = app.add_subcommand("ablate", "run all four variants on identical data");
  auto* sweep = app.add_subcommand("sweep", "interaction sparsity sweep over gRDA c values");
  for (CLI::App* cmd : {generate, cluster, search, refine, run_cmd, ablate, sweep}) add_common(cmd, common);

  auto* render = app.add_subcommand("render", "render a gene-map CSV (e.g. a snapshot) as CSV or PPM");
  std::string input;
  std::string output;
  std::string format = "image";
  render->add_option("--input", input, "gene-map CSV")->required()->check(CLI::ExistingFile);
  render->add_option("--out", output, "output file")->required();
  render->add_option("--format", format, "csv or image")->check(CLI::IsMember({"csv", "image"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  if (quiet) mces::log::set_level(mces::log::Level::kWarn);

  if (*render) {
    const mces::GeneMap map = mces::parse_gene_map_csv(mces::csv::read_text(input));
    mces::render_gene_map(map, output, format == "csv" ? mces::MapFormat::kCsv : mces::MapFormat::kImage);
    return 0;
  }

  const mces::ExperimentConfig cfg = resolve(common);
  if (*generate) {
    if (cfg.source == mces::DataSource::kFiles) throw mces::ConfigError("generate needs a synthetic or planted source");
    const mces::SyntheticBenchmark bench =
        cfg.source == mces::DataSource::kPlanted ? mces::gen_planted(cfg.planted) : mces::gen_synthetic(cfg.synthetic);
    bench.write(cfg.out_dir);
    mces::log::info("wrote {} lakes to {}", bench.lakes.size(), cfg.out_dir.string());
    return 0;
  }

  const mces::Benchmark data = mces::load_data(cfg);
  if (*cluster) {
    const mces::Prepared prep = mces::prepare(cfg, data);
    mces::write_assignment(cfg.out_dir / "lake_types.csv", prep.clusters);
    std::cout << mces::assignment_csv(prep.clusters);
  } else if (*search) {
    mces::RunOptions options;
    options.search_only = true;
    options.save_checkpoints = true;
    const mces::Report report = mces::run_experiment(cfg, data, options);
    for (const mces::RunResult& r : report.runs) {
      for (const mces::PopulationSummary& p : r.populations) {
        std::cout << fmt::format("run {} {} fitness {}\n", r.run, p.id.name(), mces::csv::format_double(p.fitness));
      }
    }
  } else if (*refine) {
    print_report(mces::refine_saved(cfg, data));
  } else if (*run_cmd) {
    print_report(mces::run_experiment(cfg, data));
  } else if (*ablate) {
    std::cout << mces::run_ablation(cfg, data).csv();
  } else if (*sweep) {
    std::cout << mces::sweep_csv(mces::sparsity_sweep(cfg, data));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const mces::ConfigError& e) {
    mces::log::error("config: {}", e.what());
    return 1;
  } catch (const mces::DataError& e) {
    mces::log::error("data: {}", e.what());
    return 2;
  } catch (const mces::NumericalError& e) {
    mces::log::error("numerical: {}", e.what());
    return 3;
  } catch (const std::exception& e) {
    mces::log::error("{}", e.what());
    return 1;
  }
}
