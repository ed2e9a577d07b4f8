#include "mces/features.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <fmt/core.h>

#include "mces/csv.hpp"
#include "mces/error.hpp"
#include "mces/log.hpp"

namespace mces {

namespace {

constexpr std::string_view kLabelColumns[] = {"sim_epi", "sim_hyp", "obs_epi", "obs_hyp"};

std::string_view kind_name(FieldKind kind) { return kind == FieldKind::kNumeric ? "numeric" : "categorical"; }

}  // namespace

std::string_view task_name(Task task) { return task == Task::kEpi ? "epi" : "hyp"; }

Task parse_task(std::string_view text) {
  if (text == "epi") return Task::kEpi;
  if (text == "hyp") return Task::kHyp;
  throw ConfigError(fmt::format("unknown task '{}'", text));
}

// ---------------------------------------------------------------- schema

FeatureSchema::FeatureSchema(std::vector<FieldSpec> fields) : fields_(std::move(fields)) {
  if (fields_.size() < 2) throw ConfigError(fmt::format("schema needs at least 2 fields, got {}", fields_.size()));
  for (std::size_t i = 0; i < fields_.size(); ++i) {
    const FieldSpec& f = fields_[i];
    if (f.name.empty()) throw ConfigError(fmt::format("schema field {} has no name", i));
    if (f.buckets < 2) throw ConfigError(fmt::format("field '{}' needs at least 2 buckets", f.name));
    for (std::size_t j = 0; j < i; ++j) {
      if (fields_[j].name == f.name) throw ConfigError(fmt::format("duplicate field name '{}'", f.name));
    }
    for (std::string_view reserved : kLabelColumns) {
      if (f.name == reserved || f.name == "date") {
        throw ConfigError(fmt::format("field name '{}' is reserved", f.name));
      }
    }
  }
}

FeatureSchema FeatureSchema::parse(std::string_view text) {
  std::vector<FieldSpec> fields;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view body = line;
    if (const auto hash = body.find('#'); hash != std::string_view::npos) body = body.substr(0, hash);
    body = csv::trim(body);
    if (body.empty()) continue;
    FieldSpec spec;
    bool have_name = false;
    bool have_kind = false;
    std::istringstream tokens{std::string(body)};
    std::string token;
    while (tokens >> token) {
      const auto eq = token.find('=');
      if (eq == std::string::npos) throw ConfigError(fmt::format("schema line {}: expected key=value, got '{}'", line_no, token));
      const std::string key = token.substr(0, eq);
      const std::string value = token.substr(eq + 1);
      if (key == "name") {
        spec.name = value;
        have_name = true;
      } else if (key == "kind") {
        if (value == "numeric") {
          spec.kind = FieldKind::kNumeric;
        } else if (value == "categorical") {
          spec.kind = FieldKind::kCategorical;
        } else {
          throw ConfigError(fmt::format("schema line {}: unknown kind '{}'", line_no, value));
        }
        have_kind = true;
      } else if (key == "buckets") {
        long k = 0;
        if (!csv::parse_long(value, k)) throw ConfigError(fmt::format("schema line {}: bad bucket count '{}'", line_no, value));
        spec.buckets = static_cast<int>(k);
      } else {
        throw ConfigError(fmt::format("schema line {}: unknown key '{}'", line_no, key));
      }
    }
    if (!have_name || !have_kind) throw ConfigError(fmt::format("schema line {}: name and kind are required", line_no));
    fields.push_back(std::move(spec));
  }
  return FeatureSchema(std::move(fields));
}

FeatureSchema FeatureSchema::load(const std::filesystem::path& path) {
  std::string text;
  for (const std::string& line : csv::read_lines(path)) text += line + "\n";
  return parse(text);
}

std::string FeatureSchema::to_text() const {
  std::string out;
  for (const FieldSpec& f : fields_) {
    out += fmt::format("name={} kind={} buckets={}\n", f.name, kind_name(f.kind), f.buckets);
  }
  return out;
}

void FeatureSchema::save(const std::filesystem::path& path) const { csv::write_text(path, to_text()); }

std::vector<std::string> FeatureSchema::names() const {
  std::vector<std::string> out;
  for (const FieldSpec& f : fields_) out.push_back(f.name);
  return out;
}

std::optional<std::size_t> FeatureSchema::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < fields_.size(); ++i) {
    if (fields_[i].name == name) return i;
  }
  return std::nullopt;
}

std::uint64_t FeatureSchema::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : to_text()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// ---------------------------------------------------------------- buckets

std::vector<double> fit_buckets(std::vector<double> values, int buckets) {
  if (buckets < 2) throw ConfigError(fmt::format("fit_buckets: need at least 2 buckets, got {}", buckets));
  std::erase_if(values, [](double v) { return !std::isfinite(v); });
  if (values.empty()) throw DataError("fit_buckets: no finite values");
  std::sort(values.begin(), values.end());
  if (values.front() == values.back()) {
    log::warn("fit_buckets: all {} values equal {}; using a single bucket", values.size(), values.front());
    return {};
  }
  const double n1 = static_cast<double>(values.size() - 1);
  std::vector<double> edges;
  for (int q = 1; q < buckets; ++q) {
    const double pos = n1 * static_cast<double>(q) / static_cast<double>(buckets);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    const double edge = values[lo] + frac * (values[hi] - values[lo]);
    if (edges.empty() || edge > edges.back()) edges.push_back(edge);
  }
  return edges;
}

int bucketize(double value, std::span<const double> edges) {
  if (std::isnan(value)) throw DataError("bucketize: NaN value");
  return static_cast<int>(std::lower_bound(edges.begin(), edges.end(), value) - edges.begin());
}

Bucketizer::Bucketizer(FeatureSchema schema, std::vector<std::vector<double>> edges)
    : schema_(std::move(schema)), edges_(std::move(edges)) {
  if (edges_.size() != schema_.size()) throw ConfigError("bucketizer: one edge list per field required");
  for (std::size_t f = 0; f < edges_.size(); ++f) {
    const auto& e = edges_[f];
    if (static_cast<int>(e.size()) > schema_.field(f).buckets - 1) {
      throw ConfigError(fmt::format("bucketizer: field '{}' has too many edges", schema_.field(f).name));
    }
    for (std::size_t i = 1; i < e.size(); ++i) {
      if (!(e[i] > e[i - 1])) throw ConfigError(fmt::format("bucketizer: edges of '{}' not increasing", schema_.field(f).name));
    }
  }
}

Bucketizer Bucketizer::fit(const FeatureSchema& schema, std::span<const LakeDataset> datasets,
                           std::chrono::sys_days begin, std::chrono::sys_days end) {
  std::vector<std::vector<double>> edges(schema.size());
  for (std::size_t f = 0; f < schema.size(); ++f) {
    if (schema.field(f).kind == FieldKind::kCategorical) continue;
    std::vector<double> values;
    for (const LakeDataset& d : datasets) {
      const auto [first, last] = d.day_range(begin, end);
      for (std::size_t t = first; t < last; ++t) values.push_back(d.features(static_cast<Index>(t), static_cast<Index>(f)));
    }
    if (values.empty()) throw DataError(fmt::format("no training values for field '{}'", schema.field(f).name));
    edges[f] = fit_buckets(std::move(values), schema.field(f).buckets);
  }
  return Bucketizer(schema, std::move(edges));
}

int Bucketizer::encode_value(std::size_t field, double value, std::size_t row) const {
  const FieldSpec& spec = schema_.field(field);
  if (std::isnan(value)) throw DataError(fmt::format("field '{}' row {}: NaN value", spec.name, row));
  if (spec.kind == FieldKind::kCategorical) {
    const double code = std::round(value);
    if (code != value || code < 0 || code >= spec.buckets) {
      throw DataError(fmt::format("field '{}' row {}: categorical code {} outside [0, {})", spec.name, row, value,
                                  spec.buckets));
    }
    return static_cast<int>(code);
  }
  return bucketize(value, edges_[field]);
}

std::vector<int> Bucketizer::encode(const LakeDataset& data) const {
  const std::size_t m = schema_.size();
  if (static_cast<std::size_t>(data.features.cols()) != m) {
    throw ConfigError(fmt::format("lake '{}' has {} feature columns, schema has {}", data.lake_id,
                                  data.features.cols(), m));
  }
  std::vector<int> out(data.days() * m);
  for (std::size_t t = 0; t < data.days(); ++t) {
    for (std::size_t f = 0; f < m; ++f) {
      out[t * m + f] = encode_value(f, data.features(static_cast<Index>(t), static_cast<Index>(f)), t);
    }
  }
  return out;
}

// ---------------------------------------------------------------- embeddings

EmbeddingTable::EmbeddingTable(const FeatureSchema& schema, Index dim) : dim_(dim) {
  if (dim <= 0) throw ConfigError("embedding size must be positive");
  for (const FieldSpec& f : schema.fields()) tables_.emplace_back(f.buckets, dim);
}

EmbeddingTable EmbeddingTable::random(const FeatureSchema& schema, Index dim, Rng& rng) {
  EmbeddingTable e(schema, dim);
  for (Tensor& t : e.tables_) {
    for (Index i = 0; i < t.size(); ++i) t.value.data()[i] = uniform(rng, -0.1, 0.1);
  }
  return e;
}

std::span<const double> embed(std::size_t field, int bucket, const EmbeddingTable& tables) {
  if (field >= tables.fields()) throw StateError(fmt::format("embed: field {} out of range", field));
  const Tensor& t = tables.table(field);
  if (bucket < 0 || bucket >= t.rows()) {
    throw StateError(fmt::format("embed: bucket {} out of range for field {} ({} rows)", bucket, field, t.rows()));
  }
  return {t.value.data() + static_cast<Index>(bucket) * t.cols(), static_cast<std::size_t>(t.cols())};
}

// ---------------------------------------------------------------- dataset

std::size_t LakeDataset::observed_count(Task task) const {
  const auto& obs = observed(task);
  return static_cast<std::size_t>(std::count_if(obs.begin(), obs.end(), [](const auto& v) { return v.has_value(); }));
}

std::size_t LakeDataset::observed_count(Task task, std::chrono::sys_days begin, std::chrono::sys_days end) const {
  const auto [first, last] = day_range(begin, end);
  const auto& obs = observed(task);
  std::size_t n = 0;
  for (std::size_t t = first; t < last; ++t) n += obs[t].has_value() ? 1 : 0;
  return n;
}

std::pair<std::size_t, std::size_t> LakeDataset::day_range(std::chrono::sys_days begin,
                                                           std::chrono::sys_days end) const {
  const auto first = static_cast<std::size_t>(std::lower_bound(dates.begin(), dates.end(), begin) - dates.begin());
  const auto last = static_cast<std::size_t>(std::lower_bound(dates.begin(), dates.end(), end) - dates.begin());
  return {first, std::max(first, last)};
}

void LakeDataset::validate(std::size_t fields) const {
  const std::size_t t = days();
  if (t == 0) throw DataError(fmt::format("lake '{}': no records", lake_id));
  if (static_cast<std::size_t>(features.rows()) != t || static_cast<std::size_t>(features.cols()) != fields ||
      sim_epi.size() != t || sim_hyp.size() != t || obs_epi.size() != t || obs_hyp.size() != t) {
    throw DataError(fmt::format("lake '{}': column lengths disagree", lake_id));
  }
  for (std::size_t i = 1; i < t; ++i) {
    if ((dates[i] - dates[i - 1]).count() != 1) {
      throw DataError(fmt::format("lake '{}': dates not consecutive between {} and {}", lake_id,
                                  format_date(dates[i - 1]), format_date(dates[i])));
    }
  }
  for (std::size_t i = 0; i < t; ++i) {
    for (double v : {sim_epi[i], sim_hyp[i]}) {
      if (!std::isfinite(v) || v < 0.0) throw DataError(fmt::format("lake '{}' day {}: invalid simulated DO {}", lake_id, i, v));
    }
    for (const auto& v : {obs_epi[i], obs_hyp[i]}) {
      if (v && (!std::isfinite(*v) || *v < 0.0)) {
        throw DataError(fmt::format("lake '{}' day {}: invalid observed DO {}", lake_id, i, *v));
      }
    }
  }
}

std::chrono::sys_days parse_date(std::string_view text) {
  text = csv::trim(text);
  long y = 0;
  long m = 0;
  long d = 0;
  if (text.size() != 10 || text[4] != '-' || text[7] != '-' || !csv::parse_long(text.substr(0, 4), y) ||
      !csv::parse_long(text.substr(5, 2), m) || !csv::parse_long(text.substr(8, 2), d)) {
    throw DataError(fmt::format("bad date '{}', expected YYYY-MM-DD", text));
  }
  const std::chrono::year_month_day ymd{std::chrono::year{static_cast<int>(y)},
                                        std::chrono::month{static_cast<unsigned>(m)},
                                        std::chrono::day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) throw DataError(fmt::format("invalid calendar date '{}'", text));
  return std::chrono::sys_days{ymd};
}

std::string format_date(std::chrono::sys_days day) {
  const std::chrono::year_month_day ymd{day};
  return fmt::format("{:04d}-{:02d}-{:02d}", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                     static_cast<unsigned>(ymd.day()));
}

LakeDataset load_dataset(const std::filesystem::path& path, const FeatureSchema& schema) {
  const std::vector<std::string> lines = csv::read_lines(path);
  if (lines.empty()) throw DataError(fmt::format("{}: empty file", path.string()));
  const std::size_t m = schema.size();

  std::vector<std::string> expected{"date"};
  for (const FieldSpec& f : schema.fields()) expected.push_back(f.name);
  for (std::string_view c : kLabelColumns) expected.emplace_back(c);
  const auto header = csv::split(lines[0]);
  bool header_ok = header.size() == expected.size();
  for (std::size_t i = 0; header_ok && i < header.size(); ++i) header_ok = csv::trim(header[i]) == expected[i];
  if (!header_ok) {
    std::string want;
    for (const auto& e : expected) want += (want.empty() ? "" : ",") + e;
    throw DataError(fmt::format("{}:1: header mismatch, expected '{}'", path.string(), want));
  }

  LakeDataset d;
  d.lake_id = path.stem().string();
  std::vector<double> feats;
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    if (csv::trim(lines[ln]).empty()) continue;
    const auto cells = csv::split(lines[ln]);
    const std::size_t line_no = ln + 1;
    if (cells.size() != expected.size()) {
      throw DataError(fmt::format("{}:{}: expected {} cells, got {}", path.string(), line_no, expected.size(), cells.size()));
    }
    std::chrono::sys_days day;
    try {
      day = parse_date(cells[0]);
    } catch (const DataError& e) {
      throw DataError(fmt::format("{}:{}: {}", path.string(), line_no, e.what()));
    }
    if (!d.dates.empty()) {
      const auto gap = (day - d.dates.back()).count();
      if (gap <= 0) {
        throw DataError(fmt::format("{}:{}: date {} does not increase", path.string(), line_no, format_date(day)));
      }
      if (gap != 1) {
        throw DataError(fmt::format("{}:{}: gap of {} days between {} and {}", path.string(), line_no, gap - 1,
                                    format_date(d.dates.back()), format_date(day)));
      }
    }
    d.dates.push_back(day);
    for (std::size_t f = 0; f < m; ++f) {
      double v = 0.0;
      if (!csv::parse_double(cells[1 + f], v)) {
        throw DataError(fmt::format("{}:{}: field '{}' has non-numeric value '{}'", path.string(), line_no,
                                    schema.field(f).name, cells[1 + f]));
      }
      feats.push_back(v);
    }
    auto label = [&](std::size_t col, bool optional) -> std::optional<double> {
      const std::string_view cell = csv::trim(cells[col]);
      if (cell.empty()) {
        if (optional) return std::nullopt;
        throw DataError(fmt::format("{}:{}: missing {}", path.string(), line_no, expected[col]));
      }
      double v = 0.0;
      if (!csv::parse_double(cell, v) || !std::isfinite(v)) {
        throw DataError(fmt::format("{}:{}: bad {} value '{}'", path.string(), line_no, expected[col], cell));
      }
      if (v < 0.0) throw DataError(fmt::format("{}:{}: negative DO {} in {}", path.string(), line_no, v, expected[col]));
      return v;
    };
    d.sim_epi.push_back(*label(1 + m, false));
    d.sim_hyp.push_back(*label(2 + m, false));
    d.obs_epi.push_back(label(3 + m, true));
    d.obs_hyp.push_back(label(4 + m, true));
  }
  if (d.dates.empty()) throw DataError(fmt::format("{}: no data rows", path.string()));
  d.features = Matrix(static_cast<Index>(d.dates.size()), static_cast<Index>(m));
  std::copy(feats.begin(), feats.end(), d.features.data());
  d.validate(m);
  log::debug("loaded lake '{}': {} days, {} epi / {} hyp observations", d.lake_id, d.days(),
             d.observed_count(Task::kEpi), d.observed_count(Task::kHyp));
  return d;
}

void write_dataset(const std::filesystem::path& path, const LakeDataset& data, const FeatureSchema& schema) {
  data.validate(schema.size());
  std::string out = "date";
  for (const FieldSpec& f : schema.fields()) out += "," + f.name;
  for (std::string_view c : kLabelColumns) out += fmt::format(",{}", c);
  out += "\n";
  auto opt = [](const std::optional<double>& v) { return v ? csv::format_double(*v) : std::string(); };
  for (std::size_t t = 0; t < data.days(); ++t) {
    out += format_date(data.dates[t]);
    for (Index f = 0; f < data.features.cols(); ++f) {
      out += ",";
      out += csv::format_double(data.features(static_cast<Index>(t), f));
    }
    out += fmt::format(",{},{},{},{}\n", csv::format_double(data.sim_epi[t]), csv::format_double(data.sim_hyp[t]),
                       opt(data.obs_epi[t]), opt(data.obs_hyp[t]));
  }
  csv::write_text(path, out);
}

std::vector<LakeMetadata> load_metadata(const std::filesystem::path& path) {
  const auto lines = csv::read_lines(path);
  if (lines.empty() || csv::trim(lines[0]) != "lake_id,area_m2,volume_m3,max_depth_m,file") {
    throw DataError(fmt::format("{}:1: expected header 'lake_id,area_m2,volume_m3,max_depth_m,file'", path.string()));
  }
  std::vector<LakeMetadata> out;
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    if (csv::trim(lines[ln]).empty()) continue;
    const auto cells = csv::split(lines[ln]);
    if (cells.size() != 5) throw DataError(fmt::format("{}:{}: expected 5 cells", path.string(), ln + 1));
    LakeMetadata meta;
    meta.lake_id = std::string(csv::trim(cells[0]));
    if (!csv::parse_double(cells[1], meta.area_m2) || !csv::parse_double(cells[2], meta.volume_m3) ||
        !csv::parse_double(cells[3], meta.max_depth_m)) {
      throw DataError(fmt::format("{}:{}: non-numeric morphometry", path.string(), ln + 1));
    }
    if (!(meta.area_m2 > 0.0) || !(meta.volume_m3 > 0.0) || !(meta.max_depth_m > 0.0)) {
      throw DataError(fmt::format("{}:{}: area, volume and depth must be positive", path.string(), ln + 1));
    }
    meta.file = std::string(csv::trim(cells[4]));
    out.push_back(std::move(meta));
  }
  return out;
}

void write_metadata(const std::filesystem::path& path, std::span<const LakeMetadata> lakes) {
  std::string out = "lake_id,area_m2,volume_m3,max_depth_m,file\n";
  for (const LakeMetadata& l : lakes) {
    out += fmt::format("{},{},{},{},{}\n", l.lake_id, csv::format_double(l.area_m2), csv::format_double(l.volume_m3),
                       csv::format_double(l.max_depth_m), l.file);
  }
  csv::write_text(path, out);
}

std::vector<LakeDataset> load_benchmark(const std::filesystem::path& metadata_path, const FeatureSchema& schema) {
  const auto lakes = load_metadata(metadata_path);
  std::vector<LakeDataset> out;
  for (const LakeMetadata& meta : lakes) {
    LakeDataset d = load_dataset(metadata_path.parent_path() / meta.file, schema);
    d.lake_id = meta.lake_id;
    d.area_m2 = meta.area_m2;
    d.volume_m3 = meta.volume_m3;
    d.max_depth_m = meta.max_depth_m;
    out.push_back(std::move(d));
  }
  return out;
}

// ---------------------------------------------------------------- windows

std::vector<Window> make_windows(const LakeDataset& data, std::span<const int> encoded, std::size_t fields,
                                 std::size_t length, std::size_t stride, std::size_t first, std::size_t last,
                                 std::size_t lake_index) {
  if (length == 0 || stride == 0) throw ConfigError("make_windows: length and stride must be positive");
  if (encoded.size() != data.days() * fields) throw ConfigError("make_windows: encoding does not match dataset");
  last = std::min(last, data.days());
  if (first >= last || length > last - first) {
    throw ConfigError(fmt::format("make_windows: window length {} exceeds the {} available days of lake '{}'", length,
                                  last > first ? last - first : 0, data.lake_id));
  }
  std::vector<Window> out;
  for (std::size_t s = first; s + length <= last; s += stride) {
    Window w;
    w.lake = lake_index;
    w.start = s;
    w.length = length;
    w.fields = fields;
    w.buckets.assign(encoded.begin() + static_cast<std::ptrdiff_t>(s * fields),
                     encoded.begin() + static_cast<std::ptrdiff_t>((s + length) * fields));
    w.sim_epi.assign(data.sim_epi.begin() + static_cast<std::ptrdiff_t>(s),
                     data.sim_epi.begin() + static_cast<std::ptrdiff_t>(s + length));
    w.sim_hyp.assign(data.sim_hyp.begin() + static_cast<std::ptrdiff_t>(s),
                     data.sim_hyp.begin() + static_cast<std::ptrdiff_t>(s + length));
    for (std::size_t t = s; t < s + length; ++t) {
      w.obs_epi.push_back(data.obs_epi[t].value_or(0.0));
      w.obs_hyp.push_back(data.obs_hyp[t].value_or(0.0));
      w.mask_epi.push_back(data.obs_epi[t].has_value() ? 1 : 0);
      w.mask_hyp.push_back(data.obs_hyp[t].has_value() ? 1 : 0);
    }
    out.push_back(std::move(w));
  }
  return out;
}

std::vector<Window> make_windows(const LakeDataset& data, std::span<const int> encoded, std::size_t fields,
                                 std::size_t length, std::size_t stride) {
  return make_windows(data, encoded, fields, length, stride, 0, data.days());
}

}  // namespace mces
