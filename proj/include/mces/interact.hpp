#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mces/rng.hpp"
#include "mces/tape.hpp"

namespace mces {

// Candidate pairwise operations. Gene maps use -1 for pruned pairs.
enum class OpCode : std::int8_t { kSum = 0, kProd = 1, kConcatProject = 2, kKernelProduct = 3 };
inline constexpr int kOpCount = 4;

std::string_view op_name(OpCode code);
OpCode op_from_int(int code);

std::size_t pair_count(std::size_t fields);
// Lexicographic slot of the unordered pair (i, j), i != j.
std::size_t pair_index(std::size_t i, std::size_t j, std::size_t fields);
std::pair<std::size_t, std::size_t> pair_at(std::size_t slot, std::size_t fields);

// Interaction genome: one operation and one relevance scalar per feature pair
// (stored once, i < j, lexicographic), plus one relevance scalar per feature.
struct Genome {
  std::size_t fields = 0;
  std::vector<OpCode> ops;
  std::vector<double> alpha;
  std::vector<double> beta;

  std::size_t pairs() const { return ops.size(); }
  OpCode op(std::size_t i, std::size_t j) const { return ops[pair_index(i, j, fields)]; }
  void set_op(std::size_t i, std::size_t j, OpCode code) { ops[pair_index(i, j, fields)] = code; }
  double pair_beta(std::size_t i, std::size_t j) const { return beta[pair_index(i, j, fields)]; }
  void check() const;

  bool operator==(const Genome&) const = default;
};

inline constexpr double kRelevanceInit = 0.5;

// Uniform random operations; alpha and beta set to `init`.
Genome init_genome(std::size_t fields, Rng& rng, double init = kRelevanceInit);

// Projections shared by every pair using the same operation.
struct OperationParams {
  Tensor concat_projection;  // d x 2d, applied to [f_i ; f_j]
  Tensor kernel;             // d x d, applied to f_i

  Index dim() const { return kernel.rows(); }
  static OperationParams random(Index dim, Rng& rng);
};

struct OperationVars {
  Var concat_projection;
  Var kernel;
};

OperationVars bind(Tape& tape, OperationParams& params);

// Interaction of two N x d embedding blocks. Callers pass the lower-index
// field as f_i.
Var apply_op(Tape& tape, OpCode code, Var f_i, Var f_j, const OperationVars& params);

struct ActiveSet {
  std::vector<bool> features;
  std::vector<bool> pairs;
  std::size_t active_features() const;
  std::size_t active_pairs() const;
};

// Entries whose relevance is nonzero.
ActiveSet prune(const Genome& genome);

// [alpha_1 f_1, ..., alpha_m f_m, beta_12 g(f_1, f_2), ..., beta_(m-1)m g(f_(m-1), f_m)]
// as an N x (m + P) d block. `alpha` and `beta` are 1 x m and 1 x P relevance
// nodes. When `active` is given, inactive entries are filled with zeros and
// not evaluated.
Var build_input(Tape& tape, const std::vector<Var>& features, const Genome& genome, Var alpha, Var beta,
                const OperationVars& params, const ActiveSet* active = nullptr);

// Exportable view of a genome: symmetric op codes (-1 where beta == 0 and on
// the diagonal) and intensities |beta| / max|beta| with |alpha| / max|alpha|
// on the diagonal.
struct GeneMap {
  std::vector<std::string> names;
  std::vector<int> codes;         // m x m
  std::vector<double> intensity;  // m x m

  std::size_t fields() const { return names.size(); }
  int code(std::size_t i, std::size_t j) const { return codes[i * fields() + j]; }
  double level(std::size_t i, std::size_t j) const { return intensity[i * fields() + j]; }
};

GeneMap gene_map(const Genome& genome, const std::vector<std::string>& names);

// Header of names, m rows of codes, a blank line, m rows of intensities
// printed with 6 decimals.
std::string gene_map_csv(const GeneMap& map);
GeneMap parse_gene_map_csv(std::string_view text);

struct Rgb {
  std::uint8_t r = 255;
  std::uint8_t g = 255;
  std::uint8_t b = 255;
  bool operator==(const Rgb&) const = default;
};

// Palette: 0 red, 1 green, 2 yellow, 3 blue, -1 white; diagonal cells are
// gray bars. Colours fade toward white as intensity drops.
Rgb gene_color(int code, double intensity, bool diagonal);

// Binary PPM (P6) with `cell` x `cell` pixels per gene.
std::string gene_map_ppm(const GeneMap& map, int cell = 16);

}  // namespace mces
