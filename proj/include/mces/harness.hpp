#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mces/config.hpp"
#include "mces/evolve.hpp"
#include "mces/laketypes.hpp"

namespace mces {

// sqrt(mean (p - y)^2) over observed points; none observed raises DataError.
double rmse(std::span<const double> predicted, std::span<const std::optional<double>> observed);

struct Benchmark {
  FeatureSchema schema;
  std::vector<LakeDataset> lakes;
};

// Generates (synthetic / planted) or loads (files) the lakes of `config`.
Benchmark load_data(const ExperimentConfig& config);

// Data shared by every run of one experiment: lake typing, bucket edges
// fit on the training split, and encoded features.
struct Prepared {
  const Benchmark* data = nullptr;
  ClusterAssignment clusters;
  std::vector<LakeType> lake_type;  // per lake
  Bucketizer bucketizer;
  std::vector<std::vector<int>> encoded;  // per lake, T x m
};

Prepared prepare(const ExperimentConfig& config, const Benchmark& data);

// Population inputs in the order (S, epi), (S, hyp), (M, epi), ... or, for
// the -multi variant, (all, epi), (all, hyp); only configured tasks appear.
// Training windows come from the training split, validation windows from
// the validation split.
std::vector<PopulationData> build_populations(const ExperimentConfig& config, const Prepared& prepared);

struct CellResult {
  LakeType type = LakeType::kS;
  Task task = Task::kEpi;
  std::string test_lake;
  std::size_t observed = 0;
  double rmse = 0.0;
  double sim_rmse = 0.0;
};

struct PopulationSummary {
  PopulationId id;
  Genome genome;
  double fitness = 0.0;
  std::uint64_t lineage = 0;
};

struct RunResult {
  std::size_t run = 0;
  std::uint64_t seed = 0;
  std::vector<PopulationSummary> populations;
  std::vector<CellResult> cells;
  std::vector<Event> events;
  long iterations = 0;
  bool converged = false;
};

struct ReportRow {
  LakeType type = LakeType::kS;
  Task task = Task::kEpi;
  std::vector<double> rmse;      // per run
  std::vector<double> sim_rmse;  // per run
  double rmse_mean = 0.0;
  double rmse_std = 0.0;
  double sim_rmse_mean = 0.0;
  double sim_rmse_std = 0.0;
};

struct Report {
  Variant variant = Variant::kFull;
  bool refined = true;
  std::vector<ReportRow> rows;
  std::vector<RunResult> runs;

  const ReportRow& row(LakeType type, Task task) const;
  // type,task,rmse_mean,rmse_std,sim_rmse_mean,sim_rmse_std,runs,variant,refined
  std::string csv() const;
  // run,seed,type,task,test_lake,observed,rmse,sim_rmse
  std::string runs_csv() const;
};

// Mean and sample standard deviation (0 for a single value).
std::pair<double, double> mean_std(std::span<const double> values);

struct RunOptions {
  bool write_outputs = true;
  // Save each population's best search-stage model under <out>/models/.
  bool save_checkpoints = false;
  // Stop after the search stage (no refinement, no evaluation).
  bool search_only = false;
};

// Search -> refine -> evaluate for config.runs seeds. Writes report.csv,
// runs.csv, genemaps/, snapshots/, events/ and predictions/ under
// config.out_dir unless disabled.
Report run_experiment(const ExperimentConfig& config, const Benchmark& data, const RunOptions& options = {});
Report run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

// Refinement and evaluation of checkpoints saved by a search-only run.
Report refine_saved(const ExperimentConfig& config, const Benchmark& data);

struct AblationReport {
  std::vector<Report> variants;  // full, -refine, -multi, -inter
  const Report& get(Variant v) const;
  // variant,type,task,rmse_mean,rmse_std
  std::string csv() const;
};

// Every variant on the same data and seeds; outputs go to <out>/<variant>/
// and <out>/ablation.csv.
AblationReport run_ablation(const ExperimentConfig& config, const Benchmark& data, bool write_outputs = true);

struct SweepRow {
  double c = 0.0;
  std::size_t run = 0;
  double sparsity = 0.0;  // fraction of pruned interactions over all populations
  double rmse_mces = 0.0;
  double rmse_random = 0.0;
  double rmse_individual = 0.0;
};

// Keeps alpha, draws every operation uniformly and scatters the beta values
// over a random permutation of the pairs, so sparsity is preserved.
Genome random_selection(const Genome& selected, Rng& rng);

// For each c (applied to the beta gRDA config): search, then compare the
// selected genomes against random selections and against individual
// features only (all beta = 0). Each genome is trained from fresh weights
// with frozen relevance for the same budget, refined unless the variant is
// -refine, and scored by test RMSE averaged over evaluation cells.
std::vector<SweepRow> sparsity_sweep(const ExperimentConfig& config, const Benchmark& data, bool write_outputs = true);
std::string sweep_csv(std::span<const SweepRow> rows);

enum class MapFormat { kCsv, kImage };

// Writes a gene map as CSV or binary PPM.
void render_gene_map(const GeneMap& map, const std::filesystem::path& out, MapFormat format);

}  // namespace mces
