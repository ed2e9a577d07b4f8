#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mces/rng.hpp"

namespace mces {

// kAll labels the single untyped population pair of the -multi variant.
enum class LakeType : int { kS = 0, kM = 1, kL = 2, kXL = 3, kAll = 4 };

inline constexpr std::array<LakeType, 4> kLakeTypes{LakeType::kS, LakeType::kM, LakeType::kL, LakeType::kXL};

std::string_view lake_type_name(LakeType type);
LakeType parse_lake_type(std::string_view text);

struct LakePoint {
  std::string lake_id;
  double log_area = 0.0;
  double log_volume = 0.0;

  // Throws DataError unless area and volume are finite and positive.
  static LakePoint from_morphometry(std::string id, double area_m2, double volume_m3);
};

struct ClusterAssignment {
  std::vector<std::string> lake_ids;
  std::vector<int> cluster;                    // per point, ordered by centroid volume
  std::vector<std::array<double, 2>> centroids;  // (log_area, log_volume)
  int iterations = 0;

  std::size_t clusters() const { return centroids.size(); }
  std::size_t size_of(int c) const;
  // Only meaningful for k = 4.
  LakeType type_of(std::size_t point) const { return static_cast<LakeType>(cluster.at(point)); }
};

// Equal-size k-means on (log area, log volume): k-means++ seeding, then
// alternating greedy capacity-constrained assignment (sizes floor(N/k) or
// ceil(N/k)) and centroid updates until stable. Labels are renumbered by
// ascending centroid volume.
ClusterAssignment balanced_kmeans(std::span<const LakePoint> points, Rng& rng, int k = 4, int max_iterations = 100);

// Sum of Euclidean distances from each point to the mean of its cluster.
double within_cluster_distance(std::span<const LakePoint> points, std::span<const int> labels, int k);

// `lake_id,type` rows.
std::string assignment_csv(const ClusterAssignment& assignment);
void write_assignment(const std::filesystem::path& path, const ClusterAssignment& assignment);
std::vector<std::pair<std::string, LakeType>> load_assignment(const std::filesystem::path& path);

}  // namespace mces
