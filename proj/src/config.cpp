#include "mces/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/core.h>

#include "mces/csv.hpp"
#include "mces/error.hpp"

namespace mces {
namespace {

using std::chrono::sys_days;

sys_days jan_first(int year) { return sys_days{std::chrono::year{year} / std::chrono::January / 1}; }

double to_double(const std::string& key, const std::string& value) {
  double v = 0.0;
  if (!csv::parse_double(csv::trim(value), v)) throw ConfigError(fmt::format("{}: expected a number, got '{}'", key, value));
  return v;
}

long to_long(const std::string& key, const std::string& value) {
  long v = 0;
  if (!csv::parse_long(csv::trim(value), v)) throw ConfigError(fmt::format("{}: expected an integer, got '{}'", key, value));
  return v;
}

std::size_t to_size(const std::string& key, const std::string& value) {
  const long v = to_long(key, value);
  if (v < 0) throw ConfigError(fmt::format("{}: must be non-negative, got {}", key, v));
  return static_cast<std::size_t>(v);
}

std::uint64_t to_u64(const std::string& key, const std::string& value) {
  const auto text = csv::trim(value);
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw ConfigError(fmt::format("{}: expected an unsigned integer, got '{}'", key, value));
  }
  return v;
}

bool to_bool(const std::string& key, const std::string& value) {
  const auto text = csv::trim(value);
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ConfigError(fmt::format("{}: expected true/false, got '{}'", key, value));
}

sys_days to_date(const std::string& key, const std::string& value) {
  try {
    return parse_date(value);
  } catch (const DataError& e) {
    throw ConfigError(fmt::format("{}: {}", key, e.what()));
  }
}

using Setter = std::function<void(const std::string& key, const std::string& value)>;
using Section = std::map<std::string, Setter>;

}  // namespace

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::kFull: return "full";
    case Variant::kNoRefine: return "-refine";
    case Variant::kNoMulti: return "-multi";
    case Variant::kNoInter: return "-inter";
  }
  return "?";
}

Variant parse_variant(std::string_view text) {
  for (Variant v : {Variant::kFull, Variant::kNoRefine, Variant::kNoMulti, Variant::kNoInter}) {
    if (text == variant_name(v)) return v;
  }
  throw ConfigError(fmt::format("unknown variant '{}' (expected full, -refine, -multi or -inter)", text));
}

void SplitConfig::validate() const {
  if (!(train_begin < train_end && train_end < validation_end && validation_end < test_end)) {
    throw ConfigError(fmt::format("splits must be chronological and non-empty: train [{}, {}), validation [{}, {}), test [{}, {})",
                                  format_date(train_begin), format_date(train_end), format_date(train_end),
                                  format_date(validation_end), format_date(validation_end), format_date(test_end)));
  }
}

void ExperimentConfig::validate() const {
  split.validate();
  if (window == 0 || stride == 0) throw ConfigError("window and stride must be positive");
  if (model.embed_dim <= 0 || model.hidden <= 0) throw ConfigError("embed_dim and hidden must be positive");
  mces.validate();
  if (refine.rho < 0.0) throw ConfigError("refine rho must be non-negative");
  if (refine.batch_size == 0) throw ConfigError("refine batch_size must be positive");
  if (runs == 0) throw ConfigError("runs must be at least 1");
  if (tasks.empty()) throw ConfigError("at least one task is required");
  if (source == DataSource::kSynthetic) synthetic.validate();
  if (source == DataSource::kPlanted) planted.validate();
  if (source == DataSource::kFiles && (metadata.empty() || schema.empty())) {
    throw ConfigError("file data source needs [data] metadata and schema paths");
  }
  if (sweep.c_values.empty()) throw ConfigError("sweep needs at least one c value");
}

SplitConfig default_split(const ExperimentConfig& config) {
  sys_days begin;
  sys_days end;
  int years = 0;
  if (config.source == DataSource::kSynthetic) {
    begin = jan_first(config.synthetic.start_year);
    end = jan_first(config.synthetic.start_year + config.synthetic.years);
    years = config.synthetic.years;
  } else if (config.source == DataSource::kPlanted) {
    begin = jan_first(config.planted.start_year);
    end = begin + std::chrono::days{static_cast<long>(config.planted.days)};
  } else {
    throw ConfigError("file data sources need an explicit [split] section");
  }
  SplitConfig s;
  s.train_begin = begin;
  s.test_end = end;
  if (years >= 3) {
    const int last = config.synthetic.start_year + years;
    s.train_end = jan_first(last - 2);
    s.validation_end = jan_first(last - 1);
  } else {
    const long total = (end - begin).count();
    s.train_end = begin + std::chrono::days{total * 6 / 10};
    s.validation_end = begin + std::chrono::days{total * 8 / 10};
  }
  return s;
}

ExperimentConfig default_config() {
  ExperimentConfig c;
  c.model.grda_alpha = GrdaConfig{1e-3, 0.5, 0.8};
  c.model.grda_beta = GrdaConfig{1e-3, 0.5, 0.8};
  c.split = default_split(c);
  return c;
}

ExperimentConfig parse_config(std::string_view text) {
  boost::property_tree::ptree tree;
  try {
    std::istringstream in{std::string(text)};
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(fmt::format("config line {}: {}", e.line(), e.message()));
  }
  ExperimentConfig c = default_config();
  bool explicit_split = false;
  std::optional<sys_days> train_begin;
  std::optional<sys_days> train_end;
  std::optional<sys_days> validation_end;
  std::optional<sys_days> test_end;

  std::map<std::string, Section> sections;
  sections["experiment"] = {
      {"runs", [&](auto& k, auto& v) { c.runs = to_size(k, v); }},
      {"seed", [&](auto& k, auto& v) { c.seed = to_u64(k, v); }},
      {"threads", [&](auto& k, auto& v) { c.threads = to_size(k, v); }},
      {"variant", [&](auto&, auto& v) { c.variant = parse_variant(csv::trim(v)); }},
      {"out", [&](auto&, auto& v) { c.out_dir = std::string(csv::trim(v)); }},
      {"tasks", [&](auto&, auto& v) {
         c.tasks.clear();
         for (auto t : csv::split(v)) {
           try {
             c.tasks.push_back(parse_task(csv::trim(t)));
           } catch (const Error& e) {
             throw ConfigError(e.what());
           }
         }
       }},
  };
  sections["data"] = {
      {"source", [&](auto& k, auto& v) {
         const auto s = csv::trim(v);
         if (s == "synthetic") {
           c.source = DataSource::kSynthetic;
         } else if (s == "planted") {
           c.source = DataSource::kPlanted;
         } else if (s == "files") {
           c.source = DataSource::kFiles;
         } else {
           throw ConfigError(fmt::format("{}: unknown source '{}'", k, s));
         }
       }},
      {"metadata", [&](auto&, auto& v) { c.metadata = std::string(csv::trim(v)); }},
      {"schema", [&](auto&, auto& v) { c.schema = std::string(csv::trim(v)); }},
  };
  SyntheticConfig& sy = c.synthetic;
  sections["synthetic"] = {
      {"lakes", [&](auto& k, auto& v) { sy.lakes = to_size(k, v); }},
      {"years", [&](auto& k, auto& v) { sy.years = static_cast<int>(to_long(k, v)); }},
      {"start_year", [&](auto& k, auto& v) { sy.start_year = static_cast<int>(to_long(k, v)); }},
      {"seed", [&](auto& k, auto& v) { sy.seed = to_u64(k, v); }},
      {"observation_rate", [&](auto& k, auto& v) { sy.observation_rate = to_double(k, v); }},
      {"observation_noise", [&](auto& k, auto& v) { sy.observation_noise = to_double(k, v); }},
      {"simulator_bias", [&](auto& k, auto& v) { sy.simulator_bias = to_double(k, v); }},
      {"k_temp", [&](auto& k, auto& v) { sy.base.k_temp = to_double(k, v); }},
      {"k_atm", [&](auto& k, auto& v) { sy.base.k_atm = to_double(k, v); }},
      {"k_sed", [&](auto& k, auto& v) { sy.base.k_sed = to_double(k, v); }},
      {"theta", [&](auto& k, auto& v) { sy.base.theta = to_double(k, v); }},
      {"nep_rate", [&](auto& k, auto& v) { sy.base.nep_rate = to_double(k, v); }},
      {"k_ent", [&](auto& k, auto& v) { sy.base.k_ent = to_double(k, v); }},
      {"t_strat", [&](auto& k, auto& v) { sy.base.t_strat = to_double(k, v); }},
  };
  PlantedConfig& pl = c.planted;
  sections["planted"] = {
      {"lakes", [&](auto& k, auto& v) { pl.lakes = to_size(k, v); }},
      {"fields", [&](auto& k, auto& v) { pl.fields = to_size(k, v); }},
      {"pair_a", [&](auto& k, auto& v) { pl.pair_a = to_size(k, v); }},
      {"pair_b", [&](auto& k, auto& v) { pl.pair_b = to_size(k, v); }},
      {"days", [&](auto& k, auto& v) { pl.days = to_size(k, v); }},
      {"start_year", [&](auto& k, auto& v) { pl.start_year = static_cast<int>(to_long(k, v)); }},
      {"offset", [&](auto& k, auto& v) { pl.offset = to_double(k, v); }},
      {"scale", [&](auto& k, auto& v) { pl.scale = to_double(k, v); }},
      {"noise", [&](auto& k, auto& v) { pl.noise = to_double(k, v); }},
      {"observation_rate", [&](auto& k, auto& v) { pl.observation_rate = to_double(k, v); }},
      {"seed", [&](auto& k, auto& v) { pl.seed = to_u64(k, v); }},
  };
  sections["split"] = {
      {"train_begin", [&](auto& k, auto& v) { train_begin = to_date(k, v); }},
      {"train_end", [&](auto& k, auto& v) { train_end = to_date(k, v); }},
      {"validation_end", [&](auto& k, auto& v) { validation_end = to_date(k, v); }},
      {"test_end", [&](auto& k, auto& v) { test_end = to_date(k, v); }},
  };
  ModelConfig& mo = c.model;
  sections["model"] = {
      {"embed_dim", [&](auto& k, auto& v) { mo.embed_dim = to_long(k, v); }},
      {"hidden", [&](auto& k, auto& v) { mo.hidden = to_long(k, v); }},
      {"window", [&](auto& k, auto& v) { c.window = to_size(k, v); }},
      {"stride", [&](auto& k, auto& v) { c.stride = to_size(k, v); }},
      {"lr", [&](auto& k, auto& v) { mo.adam.lr = to_double(k, v); }},
      {"grda_lr", [&](auto& k, auto& v) { mo.grda_alpha.lr = mo.grda_beta.lr = to_double(k, v); }},
      {"grda_c", [&](auto& k, auto& v) { mo.grda_alpha.c = mo.grda_beta.c = to_double(k, v); }},
      {"grda_mu", [&](auto& k, auto& v) { mo.grda_alpha.mu = mo.grda_beta.mu = to_double(k, v); }},
      {"grda_alpha_c", [&](auto& k, auto& v) { mo.grda_alpha.c = to_double(k, v); }},
      {"grda_beta_c", [&](auto& k, auto& v) { mo.grda_beta.c = to_double(k, v); }},
      {"divergence_limit", [&](auto& k, auto& v) { mo.divergence_limit = to_double(k, v); }},
  };
  MCESConfig& me = c.mces;
  sections["mces"] = {
      {"n", [&](auto& k, auto& v) { me.n = to_size(k, v); }},
      {"lambda", [&](auto& k, auto& v) { me.lambda = to_double(k, v); }},
      {"sigma", [&](auto& k, auto& v) { me.sigma = to_double(k, v); }},
      {"tau", [&](auto& k, auto& v) { me.tau = to_long(k, v); }},
      {"ep", [&](auto& k, auto& v) { me.ep = to_long(k, v); }},
      {"max_iterations", [&](auto& k, auto& v) { me.max_iterations = to_long(k, v); }},
      {"patience", [&](auto& k, auto& v) { me.patience = to_long(k, v); }},
      {"steps_per_iteration", [&](auto& k, auto& v) { me.steps_per_iteration = to_long(k, v); }},
      {"batch_size", [&](auto& k, auto& v) { me.batch_size = to_size(k, v); }},
      {"inter", [&](auto& k, auto& v) { me.inter_population = to_bool(k, v); }},
      {"inherit_weights", [&](auto& k, auto& v) { me.inherit_weights = to_bool(k, v); }},
  };
  sections["refine"] = {
      {"rho", [&](auto& k, auto& v) { c.refine.rho = to_double(k, v); }},
      {"epochs", [&](auto& k, auto& v) { c.refine.epochs = to_size(k, v); }},
      {"batch_size", [&](auto& k, auto& v) { c.refine.batch_size = to_size(k, v); }},
  };
  sections["sweep"] = {
      {"c", [&](auto& k, auto& v) {
         c.sweep.c_values.clear();
         for (auto cell : csv::split(v)) c.sweep.c_values.push_back(to_double(k, std::string(cell)));
       }},
      {"retrain_epochs", [&](auto& k, auto& v) { c.sweep.retrain_epochs = to_size(k, v); }},
  };
  sections["cluster"] = {
      {"max_iterations", [&](auto& k, auto& v) { c.cluster_iterations = static_cast<int>(to_long(k, v)); }},
  };

  for (const auto& [name, section] : tree) {
    if (!section.data().empty()) throw ConfigError(fmt::format("config: key '{}' outside a section", name));
    const auto it = sections.find(name);
    if (it == sections.end()) throw ConfigError(fmt::format("config: unknown section [{}]", name));
    if (name == "split") explicit_split = true;
    for (const auto& [key, value] : section) {
      const auto setter = it->second.find(key);
      if (setter == it->second.end()) throw ConfigError(fmt::format("config: unknown key '{}' in [{}]", key, name));
      setter->second(name + "." + key, value.data());
    }
  }

  if (explicit_split) {
    if (!train_begin || !train_end || !validation_end || !test_end) {
      throw ConfigError("[split] needs train_begin, train_end, validation_end and test_end");
    }
    c.split = SplitConfig{*train_begin, *train_end, *validation_end, *test_end};
  } else {
    c.split = default_split(c);
  }
  c.mces.seed = c.seed;
  c.mces.threads = c.threads;
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open config '{}'", path.string()));
  std::ostringstream buffer;
  buffer << in.rdbuf();
  ExperimentConfig c = parse_config(buffer.str());
  if (c.source == DataSource::kFiles) {
    if (c.metadata.is_relative()) c.metadata = path.parent_path() / c.metadata;
    if (c.schema.is_relative()) c.schema = path.parent_path() / c.schema;
  }
  return c;
}

}  // namespace mces
