#include "mces/simlake.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/core.h>

#include "mces/csv.hpp"
#include "mces/error.hpp"

namespace mces {
namespace {

using std::chrono::days;
using std::chrono::sys_days;

sys_days jan_first(int year) { return sys_days{std::chrono::year{year} / std::chrono::January / 1}; }

int day_of_year(sys_days day) {
  const std::chrono::year_month_day ymd{day};
  return static_cast<int>((day - jan_first(static_cast<int>(ymd.year()))).count()) + 1;
}

double seasonal(int doy, double phase_day) {
  return std::sin(2.0 * std::numbers::pi * (static_cast<double>(doy) - phase_day) / 365.0);
}

// Per-lake morphometry adjustments shared by truth and simulator runs.
LakeParams lake_params(const LakeParams& base, double max_depth, int trophic) {
  LakeParams p = base;
  const double mean_depth = 0.45 * max_depth;
  p.epi_fraction = std::clamp(4.0 / mean_depth, 0.25, 0.85);
  p.k_sed = base.k_sed * std::clamp(8.0 / max_depth, 0.4, 1.6);
  static constexpr double kTrophicScale[] = {0.5, 1.0, 1.8};
  p.nep_rate = base.nep_rate * kTrophicScale[trophic];
  return p;
}

}  // namespace

void LakeParams::validate() const {
  for (double v : {k_temp, k_temp_hyp, k_atm, k_sed, theta, nep_rate, k_ent, t_strat, strat_hysteresis}) {
    if (!std::isfinite(v)) throw ConfigError("lake parameters must be finite");
  }
  if (k_temp < 0.0 || k_temp > 1.0 || k_temp_hyp < 0.0 || k_temp_hyp > 1.0) {
    throw ConfigError("temperature relaxation rates must lie in [0, 1]");
  }
  if (k_atm < 0.0 || k_sed < 0.0 || k_ent < 0.0 || nep_rate < 0.0 || strat_hysteresis < 0.0 || theta <= 0.0) {
    throw ConfigError("lake rate constants must be non-negative");
  }
  if (!(epi_fraction > 0.0 && epi_fraction < 1.0)) throw ConfigError("epi_fraction must lie in (0, 1)");
}

double do_saturation(double temp_c) {
  if (!(temp_c >= -5.0 && temp_c <= 45.0)) {
    throw DataError(fmt::format("do_saturation: temperature {} outside -5..45 C", temp_c));
  }
  const double t = temp_c + 273.15;
  const double ln_c = -139.34411 + 1.575701e5 / t - 6.642308e7 / (t * t) + 1.243800e10 / (t * t * t) -
                      8.621949e11 / (t * t * t * t);
  return std::exp(ln_c);
}

LakeState initial_state() {
  const double sat = do_saturation(4.0);
  return LakeState{sat, sat, 4.0, 4.0, false};
}

LakeState step_day(const LakeState& state, const DriverDay& drivers, const LakeParams& p, FluxSet* out) {
  if (!std::isfinite(drivers.air_temp) || !std::isfinite(drivers.wind_speed) || !std::isfinite(drivers.shortwave)) {
    throw DataError(fmt::format("step_day: non-finite driver on day-of-year {}", drivers.day_of_year));
  }
  LakeState next = state;
  next.temp_epi = std::max(0.0, state.temp_epi + p.k_temp * (drivers.air_temp - state.temp_epi));
  next.stratified = state.stratified ? next.temp_epi >= p.t_strat - p.strat_hysteresis : next.temp_epi > p.t_strat;
  if (next.stratified) {
    next.temp_hyp = std::max(4.0, state.temp_hyp + p.k_temp_hyp * (4.0 - state.temp_hyp));
  } else {
    next.temp_hyp = std::max(4.0, next.temp_epi);
  }

  const double ratio = p.epi_fraction / (1.0 - p.epi_fraction);  // V_epi / V_hyp
  FluxSet f;
  if (next.stratified) {
    f.ent = p.k_ent * (state.do_hyp - state.do_epi);
  } else {
    const double mixed = p.epi_fraction * state.do_epi + (1.0 - p.epi_fraction) * state.do_hyp;
    f.ent = mixed - state.do_epi;
  }
  const double surface = state.do_epi + f.ent;
  f.atm = p.k_atm * drivers.wind_speed * (do_saturation(next.temp_epi) - surface);
  f.nep = p.nep_rate * (drivers.shortwave - 0.5) * std::pow(p.theta, next.temp_epi - 20.0);
  f.sed = p.k_sed * std::pow(p.theta, next.temp_hyp - 20.0);

  const bool mixed = !next.stratified;
  double net_epi = f.ent + f.atm + f.nep - (mixed ? f.sed : 0.0);
  double net_hyp = -f.ent * ratio - f.sed + (mixed ? f.atm + f.nep : 0.0);
  if (state.do_epi + net_epi < 0.0) {
    f.clamp_epi = -state.do_epi - net_epi;
    net_epi = -state.do_epi;
    f.clamped = true;
  }
  if (state.do_hyp + net_hyp < 0.0) {
    f.clamp_hyp = -state.do_hyp - net_hyp;
    net_hyp = -state.do_hyp;
    f.clamped = true;
  }
  f.net_epi = net_epi;
  f.net_hyp = net_hyp;
  next.do_epi = f.clamp_epi > 0.0 ? 0.0 : state.do_epi + net_epi;
  next.do_hyp = f.clamp_hyp > 0.0 ? 0.0 : state.do_hyp + net_hyp;
  if (out) *out = f;
  return next;
}

std::vector<double> Simulation::epi() const {
  std::vector<double> v;
  for (const LakeState& s : states) v.push_back(s.do_epi);
  return v;
}

std::vector<double> Simulation::hyp() const {
  std::vector<double> v;
  for (const LakeState& s : states) v.push_back(s.do_hyp);
  return v;
}

Simulation simulate(const LakeParams& params, const std::vector<DriverDay>& drivers, const LakeState& initial) {
  params.validate();
  if (drivers.empty()) throw ConfigError("simulate: need at least one day of drivers");
  Simulation sim;
  sim.states.reserve(drivers.size());
  sim.fluxes.reserve(drivers.size());
  LakeState s = initial;
  for (const DriverDay& d : drivers) {
    FluxSet f;
    s = step_day(s, d, params, &f);
    sim.states.push_back(s);
    sim.fluxes.push_back(f);
  }
  return sim;
}

void SyntheticConfig::validate() const {
  if (lakes < 1) throw ConfigError("synthetic benchmark needs at least one lake");
  if (years < 1) throw ConfigError("synthetic benchmark needs at least one year");
  if (!(observation_rate > 0.0 && observation_rate <= 1.0)) {
    throw ConfigError(fmt::format("observation rate {} outside (0, 1]", observation_rate));
  }
  if (observation_noise < 0.0) throw ConfigError("observation noise must be non-negative");
  if (!(simulator_bias >= 0.0 && simulator_bias < 1.0)) throw ConfigError("simulator_bias must lie in [0, 1)");
  base.validate();
}

FeatureSchema synthetic_schema() {
  return FeatureSchema({{"air_temp", FieldKind::kNumeric, 10},
                        {"wind_speed", FieldKind::kNumeric, 10},
                        {"shortwave", FieldKind::kNumeric, 10},
                        {"flux_atm", FieldKind::kNumeric, 10},
                        {"flux_nep", FieldKind::kNumeric, 10},
                        {"flux_sed", FieldKind::kNumeric, 10},
                        {"flux_ent", FieldKind::kNumeric, 10},
                        {"area", FieldKind::kNumeric, 10},
                        {"depth", FieldKind::kNumeric, 10},
                        {"trophic", FieldKind::kCategorical, 3}});
}

std::vector<LakeDataset> SyntheticBenchmark::datasets() const {
  std::vector<LakeDataset> out;
  out.reserve(lakes.size());
  for (const SyntheticLake& l : lakes) out.push_back(l.data);
  return out;
}

void SyntheticBenchmark::write(const std::filesystem::path& dir) const {
  std::vector<LakeMetadata> meta;
  for (const SyntheticLake& l : lakes) {
    meta.push_back(l.meta);
    write_dataset(dir / l.meta.file, l.data, schema);
  }
  write_metadata(dir / "metadata.csv", meta);
  schema.save(dir / "schema.txt");
}

SyntheticBenchmark gen_synthetic(const SyntheticConfig& config) {
  config.validate();
  SyntheticBenchmark bench;
  bench.schema = synthetic_schema();
  const sys_days start = jan_first(config.start_year);
  const auto total_days = static_cast<std::size_t>((jan_first(config.start_year + config.years) - start).count());
  const double b = config.simulator_bias;

  for (std::size_t lake = 0; lake < config.lakes; ++lake) {
    Rng rng(derive_seed(config.seed, lake));
    SyntheticLake out;
    const double area = std::pow(10.0, uniform(rng, 4.0, 8.0));
    const double max_depth = std::clamp(2.0 + 4.5 * (std::log10(area) - 4.0) * uniform(rng, 0.6, 1.4), 2.0, 40.0);
    const double volume = area * 0.45 * max_depth;
    const int trophic = uniform_int(rng, 0, 2);
    out.meta = LakeMetadata{fmt::format("lake{:03d}", lake), area, volume, max_depth,
                            fmt::format("lakes/lake{:03d}.csv", lake)};

    const double temp_offset = gaussian(rng, 0.0, 1.0);
    std::vector<DriverDay> drivers(total_days);
    for (std::size_t t = 0; t < total_days; ++t) {
      const int doy = day_of_year(start + days{static_cast<long>(t)});
      DriverDay& d = drivers[t];
      d.day_of_year = doy;
      d.air_temp = 10.0 + temp_offset + 14.0 * seasonal(doy, 110.0) + gaussian(rng, 0.0, 2.0);
      d.wind_speed = std::max(0.0, 3.0 + gaussian(rng, 0.0, 1.5));
      d.shortwave = std::clamp(0.5 + 0.4 * seasonal(doy, 80.0) + gaussian(rng, 0.0, 0.1), 0.0, 1.0);
    }

    const LakeParams sim_params = lake_params(config.base, max_depth, trophic);
    LakeParams truth_params = sim_params;
    truth_params.k_sed *= (1.0 + b) * uniform(rng, 0.9, 1.1);
    truth_params.nep_rate *= (1.0 + b) * uniform(rng, 0.9, 1.1);
    truth_params.k_atm *= (1.0 - 0.5 * b) * uniform(rng, 0.9, 1.1);
    const Simulation sim = simulate(sim_params, drivers, initial_state());
    const Simulation truth = simulate(truth_params, drivers, initial_state());

    LakeDataset& data = out.data;
    data.lake_id = out.meta.lake_id;
    data.area_m2 = area;
    data.volume_m3 = volume;
    data.max_depth_m = max_depth;
    data.features.resize(static_cast<Index>(total_days), static_cast<Index>(bench.schema.size()));
    for (std::size_t t = 0; t < total_days; ++t) {
      data.dates.push_back(start + days{static_cast<long>(t)});
      const FluxSet& f = sim.fluxes[t];
      const double row[] = {drivers[t].air_temp, drivers[t].wind_speed, drivers[t].shortwave, f.atm, f.nep, f.sed,
                            f.ent, std::log10(area), max_depth, static_cast<double>(trophic)};
      for (std::size_t j = 0; j < bench.schema.size(); ++j) data.features(static_cast<Index>(t), static_cast<Index>(j)) = row[j];
    }
    data.sim_epi = sim.epi();
    data.sim_hyp = sim.hyp();
    out.truth_epi = truth.epi();
    out.truth_hyp = truth.hyp();
    for (std::size_t t = 0; t < total_days; ++t) {
      auto observe = [&](double value) -> std::optional<double> {
        const double noisy = std::max(0.0, value + gaussian(rng, 0.0, config.observation_noise));
        if (!coin(rng, config.observation_rate)) return std::nullopt;
        return noisy;
      };
      data.obs_epi.push_back(observe(out.truth_epi[t]));
      data.obs_hyp.push_back(observe(out.truth_hyp[t]));
    }
    bench.lakes.push_back(std::move(out));
  }
  return bench;
}

void PlantedConfig::validate() const {
  if (lakes < 1 || days < 2) throw ConfigError("planted benchmark needs at least one lake and two days");
  if (fields < 2 || pair_a >= fields || pair_b >= fields || pair_a == pair_b) {
    throw ConfigError("planted pair must name two distinct fields");
  }
  if (!(observation_rate > 0.0 && observation_rate <= 1.0)) throw ConfigError("observation rate outside (0, 1]");
  if (noise < 0.0) throw ConfigError("noise must be non-negative");
}

SyntheticBenchmark gen_planted(const PlantedConfig& config) {
  config.validate();
  SyntheticBenchmark bench;
  std::vector<FieldSpec> fields;
  for (std::size_t j = 0; j < config.fields; ++j) fields.push_back({fmt::format("z{}", j), FieldKind::kNumeric, 10});
  bench.schema = FeatureSchema(std::move(fields));
  const sys_days start = jan_first(config.start_year);
  for (std::size_t lake = 0; lake < config.lakes; ++lake) {
    Rng rng(derive_seed(config.seed, lake));
    SyntheticLake out;
    const double area = std::pow(10.0, uniform(rng, 4.0, 8.0));
    const double max_depth = std::clamp(2.0 + 4.5 * (std::log10(area) - 4.0), 2.0, 40.0);
    out.meta = LakeMetadata{fmt::format("lake{:03d}", lake), area, area * 0.45 * max_depth, max_depth,
                            fmt::format("lakes/lake{:03d}.csv", lake)};
    LakeDataset& data = out.data;
    data.lake_id = out.meta.lake_id;
    data.area_m2 = area;
    data.volume_m3 = out.meta.volume_m3;
    data.max_depth_m = max_depth;
    data.features.resize(static_cast<Index>(config.days), static_cast<Index>(config.fields));
    for (std::size_t t = 0; t < config.days; ++t) {
      data.dates.push_back(start + days{static_cast<long>(t)});
      for (std::size_t j = 0; j < config.fields; ++j) {
        data.features(static_cast<Index>(t), static_cast<Index>(j)) = uniform(rng, 0.0, 1.0);
      }
      const double za = data.features(static_cast<Index>(t), static_cast<Index>(config.pair_a));
      const double zb = data.features(static_cast<Index>(t), static_cast<Index>(config.pair_b));
      const double truth = config.offset + config.scale * za * zb;
      const double sim = std::max(0.0, truth + gaussian(rng, 0.0, config.noise));
      data.sim_epi.push_back(sim);
      data.sim_hyp.push_back(sim);
      out.truth_epi.push_back(truth);
      out.truth_hyp.push_back(truth);
      const double obs = std::max(0.0, truth + gaussian(rng, 0.0, config.noise));
      const bool seen = coin(rng, config.observation_rate);
      data.obs_epi.push_back(seen ? std::optional<double>(obs) : std::nullopt);
      data.obs_hyp.push_back(seen ? std::optional<double>(obs) : std::nullopt);
    }
    bench.lakes.push_back(std::move(out));
  }
  return bench;
}

}  // namespace mces
