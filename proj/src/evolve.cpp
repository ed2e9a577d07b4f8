#include "mces/evolve.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include <fmt/core.h>

#include "mces/csv.hpp"
#include "mces/error.hpp"
#include "mces/interact.hpp"
#include "mces/log.hpp"

namespace mces {
namespace {

std::string join_sizes(const std::vector<std::size_t>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) out += fmt::format("{}{}", i ? "," : "", values[i]);
  return out;
}

void check_archive(std::span<const Predictor> archive, const char* what) {
  if (archive.empty()) throw StateError(fmt::format("{}: empty archive", what));
  const std::size_t m = archive.front().fields();
  for (const Predictor& p : archive) {
    if (p.fields() != m) throw ConfigError(fmt::format("{}: archive mixes {} and {} fields", what, m, p.fields()));
  }
}

Event make_event(long iteration, std::string population, std::string kind) {
  Event e;
  e.iteration = iteration;
  e.population = std::move(population);
  e.kind = std::move(kind);
  return e;
}

// Offspring bred inside a population, with its lineage set and its network
// either warm-started from the population's best model or given the label
// mean as output bias.
Predictor offspring_for(Population& pop, Predictor child, bool inherit_weights) {
  child.lineage = pop.next_lineage++;
  child.fitness.reset();
  if (!inherit_weights) {
    child.set_output_bias(pop.label_mean);
    return child;
  }
  const Predictor& donor = pop.best();
  const auto from = donor.dense_parameters();
  const auto to = child.dense_parameters();
  for (std::size_t k = 0; k < to.size(); ++k) {
    to[k]->value = from[k]->value;
    to[k]->zero_grad();
  }
  child.adam_states() = donor.adam_states();
  return child;
}

}  // namespace

std::string PopulationId::name() const { return fmt::format("{}_{}", task_name(task), lake_type_name(type)); }

void MCESConfig::validate() const {
  if (n < 1) throw ConfigError("population size n must be at least 1");
  if (!(lambda > 0.0)) throw ConfigError(fmt::format("mutation threshold lambda must be positive, got {}", lambda));
  if (!(sigma >= 0.0 && sigma <= 1.0)) throw ConfigError(fmt::format("mutation probability sigma {} outside [0, 1]", sigma));
  if (tau < 1) throw ConfigError("tau must be at least 1");
  if (ep < 1) throw ConfigError("ep must be at least 1");
  if (max_iterations < 0) throw ConfigError("max_iterations must be non-negative");
  if (patience < 0) throw ConfigError("patience must be non-negative");
  if (steps_per_iteration < 1) throw ConfigError("steps_per_iteration must be at least 1");
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
}

std::size_t Population::best_index() const {
  if (archive.empty()) throw StateError(fmt::format("population {} has an empty archive", id.name()));
  std::size_t best = 0;
  for (std::size_t i = 0; i < archive.size(); ++i) {
    if (!archive[i].fitness) throw StateError(fmt::format("population {}: archive model {} has no fitness", id.name(), i));
    if (*archive[i].fitness < *archive[best].fitness) best = i;
  }
  return best;
}

std::string Event::to_line() const {
  std::string out = fmt::format("{}\t{}\t{}", iteration, population, kind);
  if (kind == "replace") {
    out += fmt::format("\tslot={}\told={}\tnew={}", slot, fitness.size() > 0 ? csv::format_double(fitness[0]) : "none",
                       fitness.size() > 1 ? csv::format_double(fitness[1]) : "none");
  } else if (kind == "inter") {
    out += fmt::format("\tfrom={}", partner);
  } else if (kind == "mutate") {
    out += fmt::format("\tpairs={}", join_sizes(pairs));
  } else if (kind == "abort") {
    out += fmt::format("\treason={}", note);
  }
  return out;
}

std::vector<std::size_t> mutate(Genome& genome, double lambda, double sigma, Rng& rng) {
  if (!(lambda > 0.0)) throw ConfigError("mutate: lambda must be positive");
  std::vector<std::size_t> mutated;
  for (std::size_t k = 0; k < genome.pairs(); ++k) {
    if (!(std::abs(genome.beta[k]) < lambda)) continue;
    if (!coin(rng, sigma)) continue;
    const int old = static_cast<int>(genome.ops[k]);
    int next = uniform_int(rng, 0, kOpCount - 2);
    if (next >= old) ++next;
    genome.ops[k] = static_cast<OpCode>(next);
    genome.beta[k] = kRelevanceInit;
    mutated.push_back(k);
  }
  return mutated;
}

std::vector<std::size_t> mutate(Predictor& model, double lambda, double sigma, Rng& rng) {
  const auto mutated = mutate(model.genome(), lambda, sigma, rng);
  for (std::size_t k : mutated) model.beta_state().reset(k, kRelevanceInit);
  return mutated;
}

Parentage argmax_parents(std::span<const Predictor> archive) {
  check_archive(archive, "crossover");
  const Genome& first = archive.front().genome();
  Parentage p;
  p.feature.assign(first.fields, 0);
  p.pair.assign(first.pairs(), 0);
  for (std::size_t a = 1; a < archive.size(); ++a) {
    const Genome& g = archive[a].genome();
    for (std::size_t i = 0; i < g.fields; ++i) {
      if (g.alpha[i] > archive[p.feature[i]].genome().alpha[i]) p.feature[i] = a;
    }
    for (std::size_t k = 0; k < g.pairs(); ++k) {
      if (g.beta[k] > archive[p.pair[k]].genome().beta[k]) p.pair[k] = a;
    }
  }
  return p;
}

Predictor breed(std::span<const Predictor> archive, const Parentage& parents, const FeatureSchema& schema,
                const ModelConfig& config, Rng& rng) {
  check_archive(archive, "breed");
  Genome g;
  g.fields = archive.front().fields();
  if (parents.feature.size() != g.fields || parents.pair.size() != pair_count(g.fields)) {
    throw ConfigError("breed: parentage does not match the archive genomes");
  }
  for (std::size_t i = 0; i < g.fields; ++i) g.alpha.push_back(archive[parents.feature[i]].genome().alpha[i]);
  for (std::size_t k = 0; k < parents.pair.size(); ++k) {
    const Genome& src = archive[parents.pair[k]].genome();
    g.ops.push_back(src.ops[k]);
    g.beta.push_back(src.beta[k]);
  }
  Predictor child(schema, std::move(g), config, rng);
  for (std::size_t i = 0; i < child.fields(); ++i) {
    child.alpha_state().copy_coordinate(i, archive[parents.feature[i]].alpha_state(), i);
  }
  for (std::size_t k = 0; k < parents.pair.size(); ++k) {
    child.beta_state().copy_coordinate(k, archive[parents.pair[k]].beta_state(), k);
  }
  return child;
}

Predictor intra_crossover(std::span<const Predictor> archive, const FeatureSchema& schema, const ModelConfig& config,
                          Rng& rng) {
  return breed(archive, argmax_parents(archive), schema, config, rng);
}

std::pair<Predictor, Predictor> inter_crossover(std::span<const Predictor> archive_a,
                                                std::span<const Predictor> archive_b, const FeatureSchema& schema,
                                                const ModelConfig& config, Rng& rng_a, Rng& rng_b) {
  check_archive(archive_a, "inter_crossover");
  check_archive(archive_b, "inter_crossover");
  if (archive_a.front().fields() != archive_b.front().fields()) {
    throw ConfigError(fmt::format("inter_crossover: populations have {} and {} fields", archive_a.front().fields(),
                                  archive_b.front().fields()));
  }
  Predictor for_a = intra_crossover(archive_b, schema, config, rng_a);
  Predictor for_b = intra_crossover(archive_a, schema, config, rng_b);
  return {std::move(for_a), std::move(for_b)};
}

std::size_t select_worst(std::span<const Predictor> archive) {
  if (archive.empty()) throw StateError("select_worst: empty archive");
  std::size_t worst = 0;
  for (std::size_t i = 0; i < archive.size(); ++i) {
    if (!archive[i].fitness) throw StateError(fmt::format("select_worst: model {} has no fitness", i));
    if (*archive[i].fitness > *archive[worst].fitness) worst = i;
  }
  return worst;
}

std::pair<PopulationId, PopulationId> choose_pair(std::span<const LakeType> types, Rng& rng) {
  if (types.empty()) throw ConfigError("choose_pair: no lake types");
  const bool same_task = coin(rng, 0.5);
  const int t = static_cast<int>(types.size());
  if (same_task && t >= 2) {
    const Task task = coin(rng, 0.5) ? Task::kHyp : Task::kEpi;
    const int a = uniform_int(rng, 0, t - 1);
    int b = uniform_int(rng, 0, t - 2);
    if (b >= a) ++b;
    return {PopulationId{types[static_cast<std::size_t>(a)], task}, PopulationId{types[static_cast<std::size_t>(b)], task}};
  }
  const LakeType type = types[static_cast<std::size_t>(uniform_int(rng, 0, t - 1))];
  return {PopulationId{type, Task::kEpi}, PopulationId{type, Task::kHyp}};
}

std::vector<const Predictor*> MCESResult::best_models() const {
  std::vector<const Predictor*> out;
  for (const Population& p : populations) out.push_back(&p.best());
  return out;
}

void parallel_for(std::size_t count, std::size_t threads, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min(count, std::max<std::size_t>(1, threads));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          const std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (std::thread& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

void write_events(const std::filesystem::path& path, std::span<const Event> events) {
  std::string out;
  for (const Event& e : events) {
    out += e.to_line();
    out += '\n';
  }
  csv::write_text(path, out);
}

MCESResult run_mces(const FeatureSchema& schema, std::vector<PopulationData> data, const ModelConfig& model_config,
                    const MCESConfig& config, const MCESOptions& options) {
  config.validate();
  if (data.empty()) throw ConfigError("run_mces: no populations");
  MCESResult result;
  std::vector<LakeType> types;
  for (std::size_t i = 0; i < data.size(); ++i) {
    PopulationData& d = data[i];
    for (std::size_t j = 0; j < i; ++j) {
      if (data[j].id == d.id) throw ConfigError(fmt::format("run_mces: duplicate population {}", d.id.name()));
    }
    if (d.train.empty() || d.validation.empty()) {
      throw DataError(fmt::format("population {} has no training or validation windows", d.id.name()));
    }
    if (std::find(types.begin(), types.end(), d.id.type) == types.end()) types.push_back(d.id.type);
    Population p;
    p.id = d.id;
    p.train = std::move(d.train);
    p.validation = std::move(d.validation);
    p.validation_batches = make_batches(p.validation, config.batch_size);
    p.label_mean = d.label_mean;
    p.rng.seed(derive_seed(config.seed, 1 + i));
    result.populations.push_back(std::move(p));
  }
  auto& pops = result.populations;
  const std::size_t count = pops.size();
  if (config.inter_population && count >= 2) {
    // choose_pair may draw any (type, task) combination.
    for (LakeType type : types) {
      for (Task task : {Task::kEpi, Task::kHyp}) {
        const PopulationId id{type, task};
        if (std::none_of(pops.begin(), pops.end(), [&](const Population& p) { return p.id == id; })) {
          throw ConfigError(fmt::format("run_mces: inter-population crossover needs population {}", id.name()));
        }
      }
    }
  }
  auto index_of = [&](const PopulationId& id) {
    for (std::size_t i = 0; i < count; ++i) {
      if (pops[i].id == id) return i;
    }
    throw StateError(fmt::format("run_mces: population {} does not exist", id.name()));
  };

  std::vector<std::vector<Event>> pending(count);
  auto commit = [&] {
    for (auto& list : pending) {
      for (Event& e : list) {
        if (options.on_event) options.on_event(e);
        result.events.push_back(std::move(e));
      }
      list.clear();
    }
  };
  auto breed_intra = [&](Population& pop, long iteration, std::vector<Event>& out) {
    pop.offspring = offspring_for(pop, intra_crossover(pop.archive, schema, model_config, pop.rng), config.inherit_weights);
    out.push_back(make_event(iteration, pop.id.name(), "intra"));
  };
  auto mutate_offspring = [&](Population& pop, long iteration, std::vector<Event>& out) {
    Event e = make_event(iteration, pop.id.name(), "mutate");
    e.pairs = mutate(pop.offspring, config.lambda, config.sigma, pop.rng);
    out.push_back(std::move(e));
  };

  // Initial archives, then one crossover + mutation per population.
  parallel_for(count, config.threads, [&](std::size_t i) {
    Population& pop = pops[i];
    for (std::size_t j = 0; j < config.n; ++j) {
      Predictor model(schema, init_genome(schema.size(), pop.rng), model_config, pop.rng);
      model.lineage = pop.next_lineage++;
      model.set_output_bias(pop.label_mean);
      fitness(model, pop.validation_batches, pop.id.task);
      pop.archive.push_back(std::move(model));
    }
    breed_intra(pop, 0, pending[i]);
    mutate_offspring(pop, 0, pending[i]);
  });
  commit();

  std::vector<double> best_seen(count);
  for (std::size_t i = 0; i < count; ++i) best_seen[i] = *pops[i].best().fitness;
  Rng scheduler(derive_seed(config.seed, 0));
  const long inter_period = config.ep * config.tau;
  long stale = 0;
  long t = 0;
  while (t < config.max_iterations) {
    ++t;
    const bool replace_due = t % config.tau == 0;
    const bool inter_due = t % inter_period == 0;
    parallel_for(count, config.threads, [&](std::size_t i) {
      Population& pop = pops[i];
      const LossSpec loss{LossKind::kSimulated, pop.id.task, 0.0};
      auto abort_lineage = [&](const NumericalError& e) {
        log::warn("population {}: lineage {} aborted at iteration {}: {}", pop.id.name(), pop.offspring.lineage, t,
                  e.what());
        Event ev = make_event(t, pop.id.name(), "abort");
        ev.note = fmt::format("lineage {}", pop.offspring.lineage);
        pending[i].push_back(std::move(ev));
        if (inter_due) return;  // the inter phase breeds every population
        breed_intra(pop, t, pending[i]);
        mutate_offspring(pop, t, pending[i]);
      };
      try {
        for (long s = 0; s < config.steps_per_iteration; ++s) {
          train_step(pop.offspring, sample_batch(pop.train, config.batch_size, pop.rng), loss);
        }
      } catch (const NumericalError& e) {
        abort_lineage(e);
        return;
      }
      if (!replace_due) return;
      try {
        fitness(pop.offspring, pop.validation_batches, pop.id.task);
      } catch (const NumericalError& e) {
        abort_lineage(e);
        return;
      }
      const std::size_t worst = select_worst(pop.archive);
      Event ev = make_event(t, pop.id.name(), "replace");
      ev.slot = worst;
      ev.fitness = {*pop.archive[worst].fitness, *pop.offspring.fitness};
      pop.archive[worst] = std::move(pop.offspring);
      pop.offspring = Predictor();
      pending[i].push_back(std::move(ev));
      if (!inter_due) {
        breed_intra(pop, t, pending[i]);
        mutate_offspring(pop, t, pending[i]);
      }
    });
    commit();

    if (inter_due) {
      std::vector<bool> bred(count, false);
      if (config.inter_population && count >= 2) {
        const auto [id_a, id_b] = choose_pair(types, scheduler);
        const std::size_t a = index_of(id_a);
        const std::size_t b = index_of(id_b);
        auto [for_a, for_b] =
            inter_crossover(pops[a].archive, pops[b].archive, schema, model_config, pops[a].rng, pops[b].rng);
        pops[a].offspring = offspring_for(pops[a], std::move(for_a), config.inherit_weights);
        pops[b].offspring = offspring_for(pops[b], std::move(for_b), config.inherit_weights);
        Event ea = make_event(t, pops[a].id.name(), "inter");
        ea.partner = pops[b].id.name();
        Event eb = make_event(t, pops[b].id.name(), "inter");
        eb.partner = pops[a].id.name();
        pending[a].push_back(std::move(ea));
        pending[b].push_back(std::move(eb));
        bred[a] = bred[b] = true;
      }
      parallel_for(count, config.threads, [&](std::size_t i) {
        if (!bred[i]) breed_intra(pops[i], t, pending[i]);
      });
      commit();
      parallel_for(count, config.threads, [&](std::size_t i) { mutate_offspring(pops[i], t, pending[i]); });
      commit();
    }

    if (replace_due) {
      bool improved = false;
      for (std::size_t i = 0; i < count; ++i) {
        const double best = *pops[i].best().fitness;
        if (best < best_seen[i]) {
          best_seen[i] = best;
          improved = true;
        }
        if (!options.snapshot_dir.empty()) {
          const auto path = options.snapshot_dir / pops[i].id.name() / fmt::format("{}.csv", t);
          csv::write_text(path, gene_map_csv(gene_map(pops[i].best().genome(), schema.names())));
        }
      }
      stale = improved ? 0 : stale + 1;
      if (config.patience > 0 && stale >= config.patience) {
        result.converged = true;
        log::info("search converged after {} iterations", t);
        break;
      }
    }
  }
  result.iterations = t;
  return result;
}

}  // namespace mces
