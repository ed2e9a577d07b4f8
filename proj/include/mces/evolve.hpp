#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mces/features.hpp"
#include "mces/laketypes.hpp"
#include "mces/model.hpp"

namespace mces {

struct PopulationId {
  LakeType type = LakeType::kS;
  Task task = Task::kEpi;

  std::string name() const;  // e.g. "epi_S"
  bool operator==(const PopulationId&) const = default;
};

struct MCESConfig {
  std::size_t n = 4;
  double lambda = 0.2;  // mutation eligibility: |beta| < lambda
  double sigma = 0.5;   // mutation probability per eligible pair
  long tau = 10;        // replacement period (iterations)
  long ep = 10;         // inter-population period multiplier
  long max_iterations = 200;
  long patience = 5;    // replacement rounds without improvement; 0 disables
  long steps_per_iteration = 1;
  std::size_t batch_size = 16;
  bool inter_population = true;
  // Offspring start from the dense weights (and Adam moments) of their
  // population's best model instead of a fresh initialisation.
  bool inherit_weights = true;
  std::uint64_t seed = 1;
  std::size_t threads = 1;

  void validate() const;
};

// Training and validation windows for one population. `label_mean` seeds
// the output bias of every freshly built predictor.
struct PopulationData {
  PopulationId id;
  std::vector<Window> train;
  std::vector<Window> validation;
  double label_mean = 0.0;
};

struct Population {
  PopulationId id;
  std::vector<Predictor> archive;
  Predictor offspring;
  std::vector<Window> train;
  std::vector<Window> validation;
  std::vector<Batch> validation_batches;  // point into `validation`
  double label_mean = 0.0;
  Rng rng;
  std::uint64_t next_lineage = 1;

  Population() = default;
  Population(const Population&) = delete;
  Population& operator=(const Population&) = delete;
  Population(Population&&) = default;
  Population& operator=(Population&&) = default;

  std::size_t best_index() const;
  const Predictor& best() const { return archive.at(best_index()); }
};

// One line of the event log:
//   iteration <TAB> population <TAB> kind <TAB> key=value ...
// kinds: replace, intra, inter, mutate, abort.
struct Event {
  long iteration = 0;
  std::string population;
  std::string kind;
  std::string partner;          // inter: the donor population
  std::vector<std::size_t> pairs;  // mutate: mutated pair slots
  std::vector<double> fitness;  // replace: old, new
  std::size_t slot = 0;         // replace: archive index
  std::string note;             // abort: reason

  std::string to_line() const;
};

// Each pair with |beta| < lambda switches, with probability sigma, to a
// uniformly drawn different operation and gets beta reset to the initial
// value. Returns the mutated pair slots.
std::vector<std::size_t> mutate(Genome& genome, double lambda, double sigma, Rng& rng);
// As above, also resetting the mutated beta coordinates of the gRDA state.
std::vector<std::size_t> mutate(Predictor& model, double lambda, double sigma, Rng& rng);

// Per-entry argmax parents over an archive (ties to the lowest index).
struct Parentage {
  std::vector<std::size_t> feature;  // per alpha
  std::vector<std::size_t> pair;     // per beta
};
Parentage argmax_parents(std::span<const Predictor> archive);

// Offspring with ops and relevance from the chosen parents, fresh network
// weights and parent gRDA coordinate states.
Predictor breed(std::span<const Predictor> archive, const Parentage& parents, const FeatureSchema& schema,
                const ModelConfig& config, Rng& rng);

Predictor intra_crossover(std::span<const Predictor> archive, const FeatureSchema& schema, const ModelConfig& config,
                          Rng& rng);

// (offspring for A built from B's archive, offspring for B built from A's archive)
std::pair<Predictor, Predictor> inter_crossover(std::span<const Predictor> archive_a,
                                                std::span<const Predictor> archive_b, const FeatureSchema& schema,
                                                const ModelConfig& config, Rng& rng_a, Rng& rng_b);

// Index of the largest fitness loss, ties to the lowest index.
std::size_t select_worst(std::span<const Predictor> archive);

// Fair coin: same task across two distinct lake types, or one lake type with
// both tasks. With a single type only the second mode is possible.
std::pair<PopulationId, PopulationId> choose_pair(std::span<const LakeType> types, Rng& rng);

struct MCESOptions {
  // Gene-map CSV of each population's best model after every replacement
  // round, written to <dir>/<pop>/<iteration>.csv.
  std::filesystem::path snapshot_dir;
  // Called with every event as it is committed (orchestrator thread).
  std::function<void(const Event&)> on_event;
};

struct MCESResult {
  std::vector<Population> populations;
  std::vector<Event> events;
  long iterations = 0;
  bool converged = false;

  std::vector<const Predictor*> best_models() const;
};

// Multi-population search. Population order follows `data`; each population
// draws from its own stream derived from config.seed, so results do not
// depend on the thread count.
MCESResult run_mces(const FeatureSchema& schema, std::vector<PopulationData> data, const ModelConfig& model_config,
                    const MCESConfig& config, const MCESOptions& options = {});

void write_events(const std::filesystem::path& path, std::span<const Event> events);

// Runs fn(i) for i in [0, count) on up to `threads` workers. The first
// exception is rethrown after all workers finish.
void parallel_for(std::size_t count, std::size_t threads, const std::function<void(std::size_t)>& fn);

}  // namespace mces
