#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "mces/evolve.hpp"
#include "mces/model.hpp"
#include "mces/simlake.hpp"

namespace mces {

enum class Variant { kFull, kNoRefine, kNoMulti, kNoInter };

std::string_view variant_name(Variant v);  // full, -refine, -multi, -inter
Variant parse_variant(std::string_view text);

enum class DataSource { kSynthetic, kPlanted, kFiles };

struct SplitConfig {
  std::chrono::sys_days train_begin;
  std::chrono::sys_days train_end;       // = validation begin
  std::chrono::sys_days validation_end;  // = test begin
  std::chrono::sys_days test_end;

  // Throws ConfigError unless train < validation < test, each non-empty.
  void validate() const;
};

struct SweepConfig {
  std::vector<double> c_values{0.0, 0.5, 1.0, 2.0, 100.0};
  std::size_t retrain_epochs = 5;
};

struct ExperimentConfig {
  DataSource source = DataSource::kSynthetic;
  std::filesystem::path metadata;  // kFiles
  std::filesystem::path schema;    // kFiles
  SyntheticConfig synthetic;
  PlantedConfig planted;
  SplitConfig split;
  ModelConfig model;
  std::size_t window = 60;
  std::size_t stride = 30;
  MCESConfig mces;
  RefineConfig refine;
  SweepConfig sweep;
  int cluster_iterations = 100;
  Variant variant = Variant::kFull;
  std::vector<Task> tasks{Task::kEpi, Task::kHyp};
  std::size_t runs = 5;
  std::uint64_t seed = 1;
  std::size_t threads = 1;
  std::filesystem::path out_dir = "out";

  void validate() const;
};

// Chronological split of the generated record: with three or more years the
// last two are validation and test; shorter records split 60/20/20 by day.
SplitConfig default_split(const ExperimentConfig& config);

ExperimentConfig default_config();

// INI text with sections [experiment], [data], [synthetic], [planted],
// [split], [model], [mces], [refine], [sweep], [cluster]. Unknown sections
// or keys raise ConfigError. Keys not present keep default_config() values;
// without a [split] section generated data use default_split().
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace mces
