#include "mces/laketypes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/core.h>

#include "mces/csv.hpp"
#include "mces/error.hpp"

namespace mces {
namespace {

double distance(const LakePoint& p, const std::array<double, 2>& c) {
  return std::hypot(p.log_area - c[0], p.log_volume - c[1]);
}

std::vector<int> assign_balanced(std::span<const LakePoint> points, const std::vector<std::array<double, 2>>& centroids) {
  const std::size_t n = points.size();
  const std::size_t k = centroids.size();
  struct Candidate {
    double dist;
    std::size_t point;
    std::size_t cluster;
  };
  std::vector<Candidate> all;
  all.reserve(n * k);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < k; ++c) all.push_back({distance(points[i], centroids[c]), i, c});
  }
  std::stable_sort(all.begin(), all.end(), [](const Candidate& a, const Candidate& b) { return a.dist < b.dist; });
  const std::size_t floor_size = n / k;
  const std::size_t oversized_slots = n % k;
  std::vector<int> label(n, -1);
  std::vector<std::size_t> size(k, 0);
  std::size_t oversized = 0;
  for (const Candidate& cand : all) {
    if (label[cand.point] >= 0) continue;
    const std::size_t s = size[cand.cluster];
    if (s < floor_size) {
      // room below the floor
    } else if (s == floor_size && oversized < oversized_slots) {
      ++oversized;
    } else {
      continue;
    }
    label[cand.point] = static_cast<int>(cand.cluster);
    ++size[cand.cluster];
  }
  return label;
}

std::vector<std::array<double, 2>> centroids_of(std::span<const LakePoint> points, const std::vector<int>& label,
                                                std::size_t k) {
  std::vector<std::array<double, 2>> c(k, {0.0, 0.0});
  std::vector<double> count(k, 0.0);
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto j = static_cast<std::size_t>(label[i]);
    c[j][0] += points[i].log_area;
    c[j][1] += points[i].log_volume;
    count[j] += 1.0;
  }
  for (std::size_t j = 0; j < k; ++j) {
    if (count[j] > 0.0) {
      c[j][0] /= count[j];
      c[j][1] /= count[j];
    }
  }
  return c;
}

}  // namespace

std::string_view lake_type_name(LakeType type) {
  switch (type) {
    case LakeType::kS: return "S";
    case LakeType::kM: return "M";
    case LakeType::kL: return "L";
    case LakeType::kXL: return "xL";
    case LakeType::kAll: return "all";
  }
  return "?";
}

LakeType parse_lake_type(std::string_view text) {
  for (LakeType t : {LakeType::kS, LakeType::kM, LakeType::kL, LakeType::kXL, LakeType::kAll}) {
    if (text == lake_type_name(t)) return t;
  }
  throw DataError(fmt::format("unknown lake type '{}'", text));
}

LakePoint LakePoint::from_morphometry(std::string id, double area_m2, double volume_m3) {
  if (!std::isfinite(area_m2) || !std::isfinite(volume_m3) || area_m2 <= 0.0 || volume_m3 <= 0.0) {
    throw DataError(fmt::format("lake '{}': area and volume must be positive (got {}, {})", id, area_m2, volume_m3));
  }
  return LakePoint{std::move(id), std::log10(area_m2), std::log10(volume_m3)};
}

std::size_t ClusterAssignment::size_of(int c) const {
  return static_cast<std::size_t>(std::count(cluster.begin(), cluster.end(), c));
}

ClusterAssignment balanced_kmeans(std::span<const LakePoint> points, Rng& rng, int k, int max_iterations) {
  if (k < 1) throw ConfigError("balanced_kmeans: k must be positive");
  const auto kk = static_cast<std::size_t>(k);
  if (points.size() < kk) {
    throw ConfigError(fmt::format("balanced_kmeans: {} lakes cannot fill {} clusters", points.size(), k));
  }
  for (const LakePoint& p : points) {
    if (!std::isfinite(p.log_area) || !std::isfinite(p.log_volume)) {
      throw DataError(fmt::format("lake '{}' has non-finite coordinates", p.lake_id));
    }
  }

  // k-means++ seeding
  std::vector<std::array<double, 2>> centroids;
  const auto first = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(points.size()) - 1));
  centroids.push_back({points[first].log_area, points[first].log_volume});
  std::vector<double> d2(points.size());
  while (centroids.size() < kk) {
    double total = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& c : centroids) best = std::min(best, distance(points[i], c));
      d2[i] = best * best;
      total += d2[i];
    }
    std::size_t pick = 0;
    if (total > 0.0) {
      pick = std::discrete_distribution<std::size_t>(d2.begin(), d2.end())(rng);
    } else {
      pick = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(points.size()) - 1));
    }
    centroids.push_back({points[pick].log_area, points[pick].log_volume});
  }

  std::vector<int> label = assign_balanced(points, centroids);
  int iterations = 1;
  for (; iterations < std::max(1, max_iterations); ++iterations) {
    centroids = centroids_of(points, label, kk);
    std::vector<int> next = assign_balanced(points, centroids);
    if (next == label) break;
    label = std::move(next);
  }
  centroids = centroids_of(points, label, kk);

  std::vector<int> order(kk);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    const auto& ca = centroids[static_cast<std::size_t>(a)];
    const auto& cb = centroids[static_cast<std::size_t>(b)];
    return ca[1] != cb[1] ? ca[1] < cb[1] : ca[0] < cb[0];
  });
  std::vector<int> rank(kk);
  for (std::size_t r = 0; r < kk; ++r) rank[static_cast<std::size_t>(order[r])] = static_cast<int>(r);

  ClusterAssignment out;
  out.iterations = iterations;
  for (const LakePoint& p : points) out.lake_ids.push_back(p.lake_id);
  for (int l : label) out.cluster.push_back(rank[static_cast<std::size_t>(l)]);
  out.centroids.resize(kk);
  for (std::size_t j = 0; j < kk; ++j) out.centroids[static_cast<std::size_t>(rank[j])] = centroids[j];
  return out;
}

double within_cluster_distance(std::span<const LakePoint> points, std::span<const int> labels, int k) {
  const std::vector<int> label(labels.begin(), labels.end());
  const auto c = centroids_of(points, label, static_cast<std::size_t>(k));
  double total = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) total += distance(points[i], c[static_cast<std::size_t>(label[i])]);
  return total;
}

std::string assignment_csv(const ClusterAssignment& assignment) {
  std::string out = "lake_id,type\n";
  for (std::size_t i = 0; i < assignment.lake_ids.size(); ++i) {
    const std::string type = assignment.clusters() == 4 ? std::string(lake_type_name(assignment.type_of(i)))
                                                         : std::to_string(assignment.cluster[i]);
    out += fmt::format("{},{}\n", assignment.lake_ids[i], type);
  }
  return out;
}

void write_assignment(const std::filesystem::path& path, const ClusterAssignment& assignment) {
  csv::write_text(path, assignment_csv(assignment));
}

std::vector<std::pair<std::string, LakeType>> load_assignment(const std::filesystem::path& path) {
  const auto lines = csv::read_lines(path);
  if (lines.empty() || csv::trim(lines[0]) != "lake_id,type") {
    throw DataError(fmt::format("{}: expected header 'lake_id,type'", path.string()));
  }
  std::vector<std::pair<std::string, LakeType>> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (csv::trim(lines[i]).empty()) continue;
    const auto cells = csv::split(lines[i]);
    if (cells.size() != 2) throw DataError(fmt::format("{}:{}: expected 2 cells", path.string(), i + 1));
    out.emplace_back(std::string(csv::trim(cells[0])), parse_lake_type(csv::trim(cells[1])));
  }
  return out;
}

}  // namespace mces
