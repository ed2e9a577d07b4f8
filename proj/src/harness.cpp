#include "mces/harness.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <tuple>
#include <numeric>

#include <fmt/core.h>

#include "mces/csv.hpp"
#include "mces/error.hpp"
#include "mces/log.hpp"

namespace mces {
namespace {

namespace fs = std::filesystem;

std::string variant_dir(Variant v) {
  switch (v) {
    case Variant::kFull: return "full";
    case Variant::kNoRefine: return "no-refine";
    case Variant::kNoMulti: return "no-multi";
    case Variant::kNoInter: return "no-inter";
  }
  return "unknown";
}

std::vector<LakeType> population_types(const ExperimentConfig& config) {
  if (config.variant == Variant::kNoMulti) return {LakeType::kAll};
  return {kLakeTypes.begin(), kLakeTypes.end()};
}

std::uint64_t run_seed(const ExperimentConfig& config, std::size_t run) { return derive_seed(config.seed, 1000 + run); }

std::size_t find_population(const std::vector<PopulationId>& ids, PopulationId id) {
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] == id) return i;
  }
  throw StateError(fmt::format("no population {}", id.name()));
}

struct Evaluation {
  CellResult cell;
  std::string predictions_csv;
};

Evaluation evaluate_cell(const ExperimentConfig& config, const Prepared& prep, const Predictor& model, LakeType type,
                         Task task) {
  const auto& lakes = prep.data->lakes;
  std::optional<std::size_t> best;
  std::size_t best_count = 0;
  for (std::size_t i = 0; i < lakes.size(); ++i) {
    if (prep.lake_type[i] != type) continue;
    const std::size_t n = lakes[i].observed_count(task, config.split.validation_end, config.split.test_end);
    if (!best || n > best_count) {
      best = i;
      best_count = n;
    }
  }
  if (!best) throw DataError(fmt::format("no lakes of type {}", lake_type_name(type)));
  if (best_count == 0) {
    throw DataError(fmt::format("no observed {} labels in the test split for lake type {}", task_name(task),
                                lake_type_name(type)));
  }
  const LakeDataset& lake = lakes[*best];
  const auto [first, last] = lake.day_range(config.split.validation_end, config.split.test_end);
  const std::vector<double> pred = predict_series(model, lake, prep.encoded[*best], first, last, config.window);
  const auto& obs_all = lake.observed(task);
  const auto& sim_all = lake.simulated(task);
  const std::span<const std::optional<double>> obs(obs_all.data() + first, last - first);
  const std::span<const double> sim(sim_all.data() + first, last - first);

  Evaluation e;
  e.cell = CellResult{type, task, lake.lake_id, best_count, rmse(pred, obs), rmse(sim, obs)};
  e.predictions_csv = "date,predicted,simulated,observed\n";
  for (std::size_t k = 0; k < pred.size(); ++k) {
    e.predictions_csv += fmt::format("{},{},{},{}\n", format_date(lake.dates[first + k]), csv::format_double(pred[k]),
                                     csv::format_double(sim[k]), obs[k] ? csv::format_double(*obs[k]) : "");
  }
  return e;
}

struct StageOutput {
  std::vector<PopulationId> ids;
  std::vector<Predictor> best;
  std::vector<std::vector<Window>> train;
  RunResult run;
};

// Refinement (unless disabled), evaluation and output of one run.
void finish_run(const ExperimentConfig& config, const Prepared& prep, StageOutput& stage, bool write) {
  const bool refined = config.variant != Variant::kNoRefine;
  const fs::path out = config.out_dir;
  const std::string run_dir = fmt::format("run{}", stage.run.run);
  std::vector<Predictor> finals;
  for (std::size_t i = 0; i < stage.best.size(); ++i) {
    if (refined) {
      Rng rng(derive_seed(stage.run.seed, 2000 + i));
      finals.push_back(refine(stage.best[i], stage.train[i], stage.ids[i].task, config.refine, rng));
    } else {
      finals.push_back(stage.best[i]);
    }
  }
  for (LakeType type : kLakeTypes) {
    for (Task task : config.tasks) {
      const PopulationId pid{config.variant == Variant::kNoMulti ? LakeType::kAll : type, task};
      const Predictor& model = finals[find_population(stage.ids, pid)];
      Evaluation e = evaluate_cell(config, prep, model, type, task);
      if (write) {
        csv::write_text(out / "predictions" / run_dir / fmt::format("{}_{}.csv", task_name(task), lake_type_name(type)),
                        e.predictions_csv);
      }
      stage.run.cells.push_back(std::move(e.cell));
    }
  }
  if (write) {
    const auto names = prep.data->schema.names();
    for (std::size_t i = 0; i < finals.size(); ++i) {
      const GeneMap map = gene_map(finals[i].genome(), names);
      render_gene_map(map, out / "genemaps" / run_dir / (stage.ids[i].name() + ".csv"), MapFormat::kCsv);
      render_gene_map(map, out / "genemaps" / run_dir / (stage.ids[i].name() + ".ppm"), MapFormat::kImage);
    }
  }
}

StageOutput search_run(const ExperimentConfig& config, const Prepared& prep, std::size_t run, bool write) {
  StageOutput stage;
  stage.run.run = run;
  stage.run.seed = run_seed(config, run);
  MCESConfig mc = config.mces;
  mc.seed = stage.run.seed;
  mc.threads = config.threads;
  mc.inter_population = config.mces.inter_population && config.variant != Variant::kNoInter;
  MCESOptions options;
  const fs::path out = config.out_dir;
  const std::string run_dir = fmt::format("run{}", run);
  if (write) options.snapshot_dir = out / "snapshots" / run_dir;
  MCESResult result = run_mces(prep.data->schema, build_populations(config, prep), config.model, mc, options);
  for (Population& p : result.populations) {
    const Predictor& best = p.best();
    stage.ids.push_back(p.id);
    stage.best.push_back(best);
    stage.run.populations.push_back(PopulationSummary{p.id, best.genome(), *best.fitness, best.lineage});
    stage.train.push_back(std::move(p.train));
  }
  stage.run.events = std::move(result.events);
  stage.run.iterations = result.iterations;
  stage.run.converged = result.converged;
  if (write) write_events(out / "events" / (run_dir + ".tsv"), stage.run.events);
  return stage;
}

Report aggregate(const ExperimentConfig& config, std::vector<RunResult> runs) {
  Report report;
  report.variant = config.variant;
  report.refined = config.variant != Variant::kNoRefine;
  report.runs = std::move(runs);
  if (report.runs.empty() || report.runs.front().cells.empty()) return report;
  for (const CellResult& cell : report.runs.front().cells) {
    ReportRow row;
    row.type = cell.type;
    row.task = cell.task;
    for (const RunResult& r : report.runs) {
      for (const CellResult& c : r.cells) {
        if (c.type == cell.type && c.task == cell.task) {
          row.rmse.push_back(c.rmse);
          row.sim_rmse.push_back(c.sim_rmse);
        }
      }
    }
    std::tie(row.rmse_mean, row.rmse_std) = mean_std(row.rmse);
    std::tie(row.sim_rmse_mean, row.sim_rmse_std) = mean_std(row.sim_rmse);
    report.rows.push_back(std::move(row));
  }
  return report;
}

void write_report(const ExperimentConfig& config, const Report& report) {
  const fs::path out = config.out_dir;
  csv::write_text(out / "report.csv", report.csv());
  csv::write_text(out / "runs.csv", report.runs_csv());
}

Report run_prepared(const ExperimentConfig& config, const Prepared& prep, const RunOptions& options) {
  std::vector<RunResult> runs;
  for (std::size_t r = 0; r < config.runs; ++r) {
    log::info("run {}/{} ({} variant)", r + 1, config.runs, variant_name(config.variant));
    StageOutput stage = search_run(config, prep, r, options.write_outputs);
    if (options.save_checkpoints) {
      for (std::size_t i = 0; i < stage.best.size(); ++i) {
        save_checkpoint(fs::path(config.out_dir) / "models" / fmt::format("run{}", r) / (stage.ids[i].name() + ".ckpt"),
                        stage.best[i]);
      }
    }
    if (!options.search_only) finish_run(config, prep, stage, options.write_outputs);
    runs.push_back(std::move(stage.run));
  }
  Report report = aggregate(config, std::move(runs));
  if (options.write_outputs && !options.search_only) write_report(config, report);
  return report;
}

// Fresh predictor with frozen relevance trained on simulated labels, then
// refined unless disabled. Returns the test RMSE per evaluation cell.
std::vector<double> score_genome(const ExperimentConfig& config, const Prepared& prep, const Genome& genome,
                                 const PopulationData& pop, std::uint64_t seed) {
  Rng init(derive_seed(seed, 1));
  Predictor model(prep.data->schema, genome, config.model, init);
  model.set_output_bias(pop.label_mean);
  model.freeze();
  Rng order_rng(derive_seed(seed, 2));
  std::vector<std::size_t> order(pop.train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const LossSpec loss{LossKind::kSimulated, pop.id.task, 0.0};
  const std::size_t bs = config.mces.batch_size;
  for (std::size_t epoch = 0; epoch < config.sweep.retrain_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), order_rng);
    for (std::size_t i = 0; i < order.size(); i += bs) {
      Batch b;
      for (std::size_t j = i; j < std::min(order.size(), i + bs); ++j) b.push_back(&pop.train[order[j]]);
      train_step(model, b, loss);
    }
  }
  if (config.variant != Variant::kNoRefine) {
    Rng refine_rng(derive_seed(seed, 3));
    model = refine(model, pop.train, pop.id.task, config.refine, refine_rng);
  }
  std::vector<double> out;
  const std::vector<LakeType> types = pop.id.type == LakeType::kAll
                                          ? std::vector<LakeType>(kLakeTypes.begin(), kLakeTypes.end())
                                          : std::vector<LakeType>{pop.id.type};
  for (LakeType type : types) out.push_back(evaluate_cell(config, prep, model, type, pop.id.task).cell.rmse);
  return out;
}

double average(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

double rmse(std::span<const double> predicted, std::span<const std::optional<double>> observed) {
  if (predicted.size() != observed.size()) {
    throw ConfigError(fmt::format("rmse: {} predictions for {} observation slots", predicted.size(), observed.size()));
  }
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (!observed[i]) continue;
    const double e = predicted[i] - *observed[i];
    sum += e * e;
    ++n;
  }
  if (n == 0) throw DataError("rmse: no observed points");
  return std::sqrt(sum / static_cast<double>(n));
}

std::pair<double, double> mean_std(std::span<const double> values) {
  if (values.empty()) return {0.0, 0.0};
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / (n - 1.0))};
}

Benchmark load_data(const ExperimentConfig& config) {
  Benchmark b;
  switch (config.source) {
    case DataSource::kSynthetic: {
      SyntheticBenchmark s = gen_synthetic(config.synthetic);
      b.schema = s.schema;
      b.lakes = s.datasets();
      break;
    }
    case DataSource::kPlanted: {
      SyntheticBenchmark s = gen_planted(config.planted);
      b.schema = s.schema;
      b.lakes = s.datasets();
      break;
    }
    case DataSource::kFiles:
      b.schema = FeatureSchema::load(config.schema);
      b.lakes = load_benchmark(config.metadata, b.schema);
      break;
  }
  return b;
}

Prepared prepare(const ExperimentConfig& config, const Benchmark& data) {
  Prepared p;
  p.data = &data;
  std::vector<LakePoint> points;
  for (const LakeDataset& lake : data.lakes) {
    points.push_back(LakePoint::from_morphometry(lake.lake_id, lake.area_m2, lake.volume_m3));
  }
  Rng rng(derive_seed(config.seed, 0xC1));
  p.clusters = balanced_kmeans(points, rng, 4, config.cluster_iterations);
  for (std::size_t i = 0; i < points.size(); ++i) p.lake_type.push_back(p.clusters.type_of(i));
  p.bucketizer = Bucketizer::fit(data.schema, data.lakes, config.split.train_begin, config.split.train_end);
  for (const LakeDataset& lake : data.lakes) p.encoded.push_back(p.bucketizer.encode(lake));
  return p;
}

std::vector<PopulationData> build_populations(const ExperimentConfig& config, const Prepared& prep) {
  const auto& lakes = prep.data->lakes;
  const std::size_t m = prep.data->schema.size();
  std::vector<PopulationData> out;
  for (LakeType type : population_types(config)) {
    for (Task task : config.tasks) {
      PopulationData pd;
      pd.id = PopulationId{type, task};
      double sum = 0.0;
      double count = 0.0;
      for (std::size_t i = 0; i < lakes.size(); ++i) {
        if (type != LakeType::kAll && prep.lake_type[i] != type) continue;
        const LakeDataset& lake = lakes[i];
        const auto [t0, t1] = lake.day_range(config.split.train_begin, config.split.train_end);
        if (t1 > t0 && t1 - t0 >= config.window) {
          auto w = make_windows(lake, prep.encoded[i], m, config.window, config.stride, t0, t1, i);
          std::move(w.begin(), w.end(), std::back_inserter(pd.train));
          for (std::size_t t = t0; t < t1; ++t) sum += lake.simulated(task)[t];
          count += static_cast<double>(t1 - t0);
        }
        const auto [v0, v1] = lake.day_range(config.split.train_end, config.split.validation_end);
        if (v1 > v0) {
          const std::size_t len = std::min(config.window, v1 - v0);
          auto w = make_windows(lake, prep.encoded[i], m, len, std::max<std::size_t>(1, len / 2), v0, v1, i);
          std::move(w.begin(), w.end(), std::back_inserter(pd.validation));
        }
      }
      if (pd.train.empty()) {
        throw DataError(fmt::format("population {} has no training windows of {} days", pd.id.name(), config.window));
      }
      if (pd.validation.empty()) throw DataError(fmt::format("population {} has no validation days", pd.id.name()));
      pd.label_mean = sum / count;
      out.push_back(std::move(pd));
    }
  }
  return out;
}

const ReportRow& Report::row(LakeType type, Task task) const {
  for (const ReportRow& r : rows) {
    if (r.type == type && r.task == task) return r;
  }
  throw StateError(fmt::format("report has no row for {} {}", lake_type_name(type), task_name(task)));
}

std::string Report::csv() const {
  std::string out = "type,task,rmse_mean,rmse_std,sim_rmse_mean,sim_rmse_std,runs,variant,refined\n";
  for (const ReportRow& r : rows) {
    out += fmt::format("{},{},{},{},{},{},{},{},{}\n", lake_type_name(r.type), task_name(r.task),
                       csv::format_double(r.rmse_mean), csv::format_double(r.rmse_std),
                       csv::format_double(r.sim_rmse_mean), csv::format_double(r.sim_rmse_std), r.rmse.size(),
                       variant_name(variant), refined ? 1 : 0);
  }
  return out;
}

std::string Report::runs_csv() const {
  std::string out = "run,seed,type,task,test_lake,observed,rmse,sim_rmse\n";
  for (const RunResult& r : runs) {
    for (const CellResult& c : r.cells) {
      out += fmt::format("{},{},{},{},{},{},{},{}\n", r.run, r.seed, lake_type_name(c.type), task_name(c.task),
                         c.test_lake, c.observed, csv::format_double(c.rmse), csv::format_double(c.sim_rmse));
    }
  }
  return out;
}

Report run_experiment(const ExperimentConfig& config, const Benchmark& data, const RunOptions& options) {
  config.validate();
  const Prepared prep = prepare(config, data);
  if (options.write_outputs) write_assignment(fs::path(config.out_dir) / "lake_types.csv", prep.clusters);
  return run_prepared(config, prep, options);
}

Report run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  const Benchmark data = load_data(config);
  return run_experiment(config, data, options);
}

Report refine_saved(const ExperimentConfig& config, const Benchmark& data) {
  config.validate();
  const Prepared prep = prepare(config, data);
  std::vector<RunResult> runs;
  for (std::size_t r = 0; r < config.runs; ++r) {
    StageOutput stage;
    stage.run.run = r;
    stage.run.seed = run_seed(config, r);
    for (PopulationData& pd : build_populations(config, prep)) {
      const fs::path path = fs::path(config.out_dir) / "models" / fmt::format("run{}", r) / (pd.id.name() + ".ckpt");
      Predictor model = load_checkpoint(path, data.schema);
      stage.run.populations.push_back(
          PopulationSummary{pd.id, model.genome(), model.fitness.value_or(0.0), model.lineage});
      stage.ids.push_back(pd.id);
      stage.best.push_back(std::move(model));
      stage.train.push_back(std::move(pd.train));
    }
    finish_run(config, prep, stage, true);
    runs.push_back(std::move(stage.run));
  }
  Report report = aggregate(config, std::move(runs));
  write_report(config, report);
  return report;
}

const Report& AblationReport::get(Variant v) const {
  for (const Report& r : variants) {
    if (r.variant == v) return r;
  }
  throw StateError(fmt::format("ablation has no {} variant", variant_name(v)));
}

std::string AblationReport::csv() const {
  std::string out = "variant,type,task,rmse_mean,rmse_std\n";
  for (const Report& rep : variants) {
    for (const ReportRow& r : rep.rows) {
      out += fmt::format("{},{},{},{},{}\n", variant_name(rep.variant), lake_type_name(r.type), task_name(r.task),
                         csv::format_double(r.rmse_mean), csv::format_double(r.rmse_std));
    }
  }
  return out;
}

AblationReport run_ablation(const ExperimentConfig& config, const Benchmark& data, bool write_outputs) {
  config.validate();
  const Prepared prep = prepare(config, data);
  AblationReport out;
  for (Variant v : {Variant::kFull, Variant::kNoRefine, Variant::kNoMulti, Variant::kNoInter}) {
    ExperimentConfig c = config;
    c.variant = v;
    c.out_dir = fs::path(config.out_dir) / variant_dir(v);
    RunOptions options;
    options.write_outputs = write_outputs;
    out.variants.push_back(run_prepared(c, prep, options));
  }
  if (write_outputs) csv::write_text(fs::path(config.out_dir) / "ablation.csv", out.csv());
  return out;
}

Genome random_selection(const Genome& selected, Rng& rng) {
  selected.check();
  Genome g = selected;
  for (OpCode& op : g.ops) op = static_cast<OpCode>(uniform_int(rng, 0, kOpCount - 1));
  std::shuffle(g.beta.begin(), g.beta.end(), rng);
  return g;
}

std::vector<SweepRow> sparsity_sweep(const ExperimentConfig& config, const Benchmark& data, bool write_outputs) {
  config.validate();
  const Prepared prep = prepare(config, data);
  std::vector<SweepRow> rows;
  for (std::size_t r = 0; r < config.runs; ++r) {
    for (double c : config.sweep.c_values) {
      ExperimentConfig cfg = config;
      cfg.model.grda_beta.c = c;
      cfg.out_dir = fs::path(config.out_dir) / "sweep" / fmt::format("c{}", csv::format_double(c));
      StageOutput stage = search_run(cfg, prep, r, false);
      const std::vector<PopulationData> pops = build_populations(cfg, prep);
      SweepRow row;
      row.c = c;
      row.run = r;
      std::size_t pruned = 0;
      std::size_t total = 0;
      std::vector<double> mces_rmse;
      std::vector<double> random_rmse;
      std::vector<double> individual_rmse;
      for (std::size_t i = 0; i < pops.size(); ++i) {
        const Genome& selected = stage.run.populations[i].genome;
        pruned += static_cast<std::size_t>(std::count(selected.beta.begin(), selected.beta.end(), 0.0));
        total += selected.pairs();
        Rng rng(derive_seed(stage.run.seed, 3000 + i));
        const Genome random = random_selection(selected, rng);
        Genome individual = selected;
        std::fill(individual.beta.begin(), individual.beta.end(), 0.0);
        const std::uint64_t seed = derive_seed(stage.run.seed, 4000 + i);
        for (double v : score_genome(cfg, prep, selected, pops[i], seed)) mces_rmse.push_back(v);
        for (double v : score_genome(cfg, prep, random, pops[i], seed)) random_rmse.push_back(v);
        for (double v : score_genome(cfg, prep, individual, pops[i], seed)) individual_rmse.push_back(v);
      }
      row.sparsity = total ? static_cast<double>(pruned) / static_cast<double>(total) : 0.0;
      row.rmse_mces = average(mces_rmse);
      row.rmse_random = average(random_rmse);
      row.rmse_individual = average(individual_rmse);
      log::info("sweep run {} c={}: sparsity {:.3f}, rmse selected {:.4f} random {:.4f} individual {:.4f}", r, c,
                row.sparsity, row.rmse_mces, row.rmse_random, row.rmse_individual);
      rows.push_back(row);
    }
  }
  if (write_outputs) csv::write_text(fs::path(config.out_dir) / "sweep.csv", sweep_csv(rows));
  return rows;
}

std::string sweep_csv(std::span<const SweepRow> rows) {
  std::string out = "c,run,sparsity,rmse_mces,rmse_random,rmse_individual\n";
  for (const SweepRow& r : rows) {
    out += fmt::format("{},{},{},{},{},{}\n", csv::format_double(r.c), r.run, csv::format_double(r.sparsity),
                       csv::format_double(r.rmse_mces), csv::format_double(r.rmse_random),
                       csv::format_double(r.rmse_individual));
  }
  return out;
}

void render_gene_map(const GeneMap& map, const std::filesystem::path& out, MapFormat format) {
  csv::write_text(out, format == MapFormat::kCsv ? gene_map_csv(map) : gene_map_ppm(map));
}

}  // namespace mces
