#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mces/rng.hpp"
#include "mces/tensor.hpp"

namespace mces {

enum class Task { kEpi = 0, kHyp = 1 };

std::string_view task_name(Task task);
Task parse_task(std::string_view text);

enum class FieldKind { kNumeric, kCategorical };

struct FieldSpec {
  std::string name;
  FieldKind kind = FieldKind::kNumeric;
  int buckets = 10;
};

// Ordered input fields. Numeric fields are bucketized; categorical fields
// carry integer codes in [0, buckets).
//
// Text form, one field per line, '#' starts a comment:
//   name=air_temp kind=numeric buckets=10
//   name=trophic kind=categorical buckets=3
class FeatureSchema {
 public:
  FeatureSchema() = default;
  explicit FeatureSchema(std::vector<FieldSpec> fields);

  static FeatureSchema parse(std::string_view text);
  static FeatureSchema load(const std::filesystem::path& path);
  std::string to_text() const;
  void save(const std::filesystem::path& path) const;

  std::size_t size() const { return fields_.size(); }
  const FieldSpec& field(std::size_t i) const { return fields_.at(i); }
  const std::vector<FieldSpec>& fields() const { return fields_; }
  std::vector<std::string> names() const;
  std::optional<std::size_t> index_of(std::string_view name) const;
  // FNV-1a over the canonical text form; checkpoints record it.
  std::uint64_t hash() const;

 private:
  std::vector<FieldSpec> fields_;
};

// Equal-frequency cut points (linear-interpolated quantiles at q/K, q = 1..K-1)
// over finite values. Duplicate edges collapse; a constant series yields no
// edges and logs a warning.
std::vector<double> fit_buckets(std::vector<double> values, int buckets);

// Count of edges strictly less than `value`, so results lie in
// [0, edges.size()]. NaN raises DataError.
int bucketize(double value, std::span<const double> edges);

struct LakeDataset;

// Per-field edges fit on training data.
class Bucketizer {
 public:
  Bucketizer() = default;
  Bucketizer(FeatureSchema schema, std::vector<std::vector<double>> edges);

  // Fits numeric fields on days [begin, end) of each dataset.
  static Bucketizer fit(const FeatureSchema& schema, std::span<const LakeDataset> datasets,
                        std::chrono::sys_days begin, std::chrono::sys_days end);

  const FeatureSchema& schema() const { return schema_; }
  const std::vector<double>& edges(std::size_t field) const { return edges_.at(field); }

  int encode_value(std::size_t field, double value, std::size_t row) const;
  // T x m bucket indices, row-major.
  std::vector<int> encode(const LakeDataset& data) const;

 private:
  FeatureSchema schema_;
  std::vector<std::vector<double>> edges_;
};

// One K_i x d trainable table per field.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  EmbeddingTable(const FeatureSchema& schema, Index dim);
  // Uniform in [-0.1, 0.1].
  static EmbeddingTable random(const FeatureSchema& schema, Index dim, Rng& rng);

  Index dim() const { return dim_; }
  std::size_t fields() const { return tables_.size(); }
  Tensor& table(std::size_t field) { return tables_.at(field); }
  const Tensor& table(std::size_t field) const { return tables_.at(field); }
  std::vector<Tensor>& tables() { return tables_; }
  const std::vector<Tensor>& tables() const { return tables_; }

 private:
  std::vector<Tensor> tables_;
  Index dim_ = 0;
};

// Row lookup; the returned view aliases the table storage.
std::span<const double> embed(std::size_t field, int bucket, const EmbeddingTable& tables);

struct LakeDataset {
  std::string lake_id;
  double area_m2 = 0.0;
  double volume_m3 = 0.0;
  double max_depth_m = 0.0;
  std::vector<std::chrono::sys_days> dates;
  Matrix features;  // T x m raw values
  std::vector<double> sim_epi;
  std::vector<double> sim_hyp;
  std::vector<std::optional<double>> obs_epi;
  std::vector<std::optional<double>> obs_hyp;

  std::size_t days() const { return dates.size(); }
  const std::vector<double>& simulated(Task task) const { return task == Task::kEpi ? sim_epi : sim_hyp; }
  const std::vector<std::optional<double>>& observed(Task task) const {
    return task == Task::kEpi ? obs_epi : obs_hyp;
  }
  std::size_t observed_count(Task task) const;
  std::size_t observed_count(Task task, std::chrono::sys_days begin, std::chrono::sys_days end) const;
  // Index range [first, last) of days falling in [begin, end).
  std::pair<std::size_t, std::size_t> day_range(std::chrono::sys_days begin, std::chrono::sys_days end) const;
  // Throws DataError on any broken invariant.
  void validate(std::size_t fields) const;
};

std::chrono::sys_days parse_date(std::string_view text);
std::string format_date(std::chrono::sys_days day);

// Lake CSV: date,<fields...>,sim_epi,sim_hyp,obs_epi,obs_hyp. Empty
// observation cells mean "not observed".
LakeDataset load_dataset(const std::filesystem::path& path, const FeatureSchema& schema);
void write_dataset(const std::filesystem::path& path, const LakeDataset& data, const FeatureSchema& schema);

struct LakeMetadata {
  std::string lake_id;
  double area_m2 = 0.0;
  double volume_m3 = 0.0;
  double max_depth_m = 0.0;
  std::string file;
};

// Metadata CSV: lake_id,area_m2,volume_m3,max_depth_m,file
std::vector<LakeMetadata> load_metadata(const std::filesystem::path& path);
void write_metadata(const std::filesystem::path& path, std::span<const LakeMetadata> lakes);

// Loads every lake listed in a metadata file; data files resolve relative to
// the metadata file's directory.
std::vector<LakeDataset> load_benchmark(const std::filesystem::path& metadata_path, const FeatureSchema& schema);

// A run of consecutive days cut from one lake.
struct Window {
  std::size_t lake = 0;
  std::size_t start = 0;  // day index of the first step
  std::size_t length = 0;
  std::size_t fields = 0;
  std::vector<int> buckets;  // length x fields
  std::vector<double> sim_epi;
  std::vector<double> sim_hyp;
  std::vector<double> obs_epi;  // 0 where unobserved
  std::vector<double> obs_hyp;
  std::vector<std::uint8_t> mask_epi;
  std::vector<std::uint8_t> mask_hyp;

  int bucket(std::size_t step, std::size_t field) const { return buckets[step * fields + field]; }
  const std::vector<double>& simulated(Task task) const { return task == Task::kEpi ? sim_epi : sim_hyp; }
  const std::vector<double>& observed(Task task) const { return task == Task::kEpi ? obs_epi : obs_hyp; }
  const std::vector<std::uint8_t>& mask(Task task) const { return task == Task::kEpi ? mask_epi : mask_hyp; }
  std::size_t end() const { return start + length; }
};

// Windows of `length` days every `stride` days inside day indices
// [first, last). `encoded` is the Bucketizer::encode output for `data`.
std::vector<Window> make_windows(const LakeDataset& data, std::span<const int> encoded, std::size_t fields,
                                 std::size_t length, std::size_t stride, std::size_t first, std::size_t last,
                                 std::size_t lake_index = 0);

// Whole-record convenience overload.
std::vector<Window> make_windows(const LakeDataset& data, std::span<const int> encoded, std::size_t fields,
                                 std::size_t length, std::size_t stride);

}  // namespace mces
