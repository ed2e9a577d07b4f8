#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "mces/features.hpp"
#include "mces/rng.hpp"

namespace mces {

// Rates are per day; concentrations in g/m^3.
struct LakeParams {
  double k_temp = 0.1;        // air -> epilimnion temperature relaxation
  double k_temp_hyp = 0.02;   // hypolimnion relaxation toward 4 C while stratified
  double k_atm = 0.05;        // reaeration per (m/s) of wind
  double k_sed = 0.3;         // sediment demand at 20 C
  double theta = 1.08;        // temperature coefficient
  double nep_rate = 0.25;     // production at full light, 20 C
  double k_ent = 0.0;         // stratified entrainment rate
  double t_strat = 15.0;      // stratification onset (C)
  double strat_hysteresis = 1.0;  // mixing resumes below t_strat - hysteresis
  double epi_fraction = 0.5;  // V_epi / V

  void validate() const;
};

struct LakeState {
  double do_epi = 0.0;
  double do_hyp = 0.0;
  double temp_epi = 4.0;
  double temp_hyp = 4.0;
  bool stratified = false;
};

struct DriverDay {
  double air_temp = 0.0;   // C
  double wind_speed = 0.0; // m/s
  double shortwave = 0.0;  // 0..1 light proxy
  int day_of_year = 1;
};

struct FluxSet {
  double atm = 0.0;  // surface exchange into the epilimnion
  double nep = 0.0;  // net ecosystem production
  double sed = 0.0;  // sediment demand magnitude (>= 0)
  double ent = 0.0;  // exchange into the epilimnion from the hypolimnion
  // Net change per layer. When a layer would go negative, the shortfall is
  // booked in clamp_* (>= 0) and `clamped` is set, so that
  // state_next = state + net holds for every day.
  double net_epi = 0.0;
  double net_hyp = 0.0;
  double clamp_epi = 0.0;
  double clamp_hyp = 0.0;
  bool clamped = false;
};

// Benson-Krause saturation at one atmosphere. Valid for -5..45 C; other
// temperatures raise DataError.
double do_saturation(double temp_c);

// One Euler day. Non-finite drivers raise DataError.
LakeState step_day(const LakeState& state, const DriverDay& drivers, const LakeParams& params, FluxSet* fluxes = nullptr);

struct Simulation {
  std::vector<LakeState> states;  // after each day
  std::vector<FluxSet> fluxes;
  std::vector<double> epi() const;
  std::vector<double> hyp() const;
};

// Equilibrium start: both layers saturated at 4 C, mixed.
LakeState initial_state();

Simulation simulate(const LakeParams& params, const std::vector<DriverDay>& drivers, const LakeState& initial);

struct SyntheticConfig {
  std::size_t lakes = 32;
  int years = 3;
  int start_year = 2015;
  std::uint64_t seed = 1;
  double observation_rate = 0.02;
  double observation_noise = 0.3;
  // Relative mismatch between the truth and simulator parameters.
  double simulator_bias = 0.6;
  LakeParams base;

  void validate() const;
};

struct SyntheticLake {
  LakeMetadata meta;
  LakeDataset data;
  std::vector<double> truth_epi;
  std::vector<double> truth_hyp;
};

struct SyntheticBenchmark {
  FeatureSchema schema;
  std::vector<SyntheticLake> lakes;

  std::vector<LakeDataset> datasets() const;
  // <dir>/metadata.csv, <dir>/schema.txt, <dir>/lakes/<id>.csv
  void write(const std::filesystem::path& dir) const;
};

// air_temp, wind_speed, shortwave, flux_atm, flux_nep, flux_sed, flux_ent,
// area, depth, trophic
FeatureSchema synthetic_schema();

SyntheticBenchmark gen_synthetic(const SyntheticConfig& config);

// Benchmark whose label depends on one multiplicative feature pair:
// y = offset + scale * z_a * z_b + noise with iid uniform fields z.
struct PlantedConfig {
  std::size_t lakes = 8;
  std::size_t fields = 6;
  std::size_t pair_a = 1;
  std::size_t pair_b = 3;
  std::size_t days = 730;
  int start_year = 2015;
  double offset = 8.0;
  double scale = 2.0;
  double noise = 0.1;
  double observation_rate = 1.0;
  std::uint64_t seed = 1;

  void validate() const;
};

SyntheticBenchmark gen_planted(const PlantedConfig& config);

}  // namespace mces
