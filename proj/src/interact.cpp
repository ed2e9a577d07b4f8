#include "mces/interact.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <fmt/core.h>

#include "mces/csv.hpp"
#include "mces/error.hpp"
#include "mces/log.hpp"

namespace mces {

std::string_view op_name(OpCode code) {
  switch (code) {
    case OpCode::kSum: return "sum";
    case OpCode::kProd: return "prod";
    case OpCode::kConcatProject: return "concat_project";
    case OpCode::kKernelProduct: return "kernel_product";
  }
  return "?";
}

OpCode op_from_int(int code) {
  if (code < 0 || code >= kOpCount) throw DataError(fmt::format("operation code {} outside 0..3", code));
  return static_cast<OpCode>(code);
}

std::size_t pair_count(std::size_t fields) { return fields * (fields - 1) / 2; }

std::size_t pair_index(std::size_t i, std::size_t j, std::size_t fields) {
  if (i == j || i >= fields || j >= fields) {
    throw StateError(fmt::format("pair_index: invalid pair ({}, {}) for {} fields", i, j, fields));
  }
  if (i > j) std::swap(i, j);
  return i * fields - i * (i + 1) / 2 + (j - i - 1);
}

std::pair<std::size_t, std::size_t> pair_at(std::size_t slot, std::size_t fields) {
  std::size_t i = 0;
  std::size_t row = fields - 1;
  while (slot >= row) {
    slot -= row;
    ++i;
    --row;
  }
  return {i, i + 1 + slot};
}

void Genome::check() const {
  if (fields < 2) throw ConfigError("genome needs at least 2 fields");
  if (alpha.size() != fields || beta.size() != pair_count(fields) || ops.size() != pair_count(fields)) {
    throw ConfigError(fmt::format("genome sizes inconsistent: m={} alpha={} beta={} ops={}", fields, alpha.size(),
                                  beta.size(), ops.size()));
  }
}

Genome init_genome(std::size_t fields, Rng& rng, double init) {
  if (fields < 2) throw ConfigError("init_genome: need at least 2 fields");
  Genome g;
  g.fields = fields;
  const std::size_t p = pair_count(fields);
  g.ops.reserve(p);
  for (std::size_t k = 0; k < p; ++k) g.ops.push_back(static_cast<OpCode>(uniform_int(rng, 0, kOpCount - 1)));
  g.alpha.assign(fields, init);
  g.beta.assign(p, init);
  return g;
}

OperationParams OperationParams::random(Index dim, Rng& rng) {
  OperationParams p{Tensor(dim, 2 * dim), Tensor(dim, dim)};
  const double b1 = 1.0 / std::sqrt(2.0 * static_cast<double>(dim));
  const double b2 = 1.0 / std::sqrt(static_cast<double>(dim));
  for (Index i = 0; i < p.concat_projection.size(); ++i) p.concat_projection.value.data()[i] = uniform(rng, -b1, b1);
  for (Index i = 0; i < p.kernel.size(); ++i) p.kernel.value.data()[i] = uniform(rng, -b2, b2);
  return p;
}

OperationVars bind(Tape& tape, OperationParams& params) {
  return OperationVars{tape.parameter(params.concat_projection), tape.parameter(params.kernel)};
}

Var apply_op(Tape& tape, OpCode code, Var f_i, Var f_j, const OperationVars& params) {
  const Matrix& a = tape.value(f_i);
  const Matrix& b = tape.value(f_j);
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ConfigError(fmt::format("apply_op: operand shapes {}x{} and {}x{} differ", a.rows(), a.cols(), b.rows(),
                                  b.cols()));
  }
  switch (code) {
    case OpCode::kSum: return tape.add(f_i, f_j);
    case OpCode::kProd: return tape.mul(f_i, f_j);
    case OpCode::kConcatProject: {
      const Var parts[] = {f_i, f_j};
      return tape.matmul_nt(tape.concat_cols(parts), params.concat_projection);
    }
    case OpCode::kKernelProduct: return tape.mul(tape.matmul_nt(f_i, params.kernel), f_j);
  }
  throw StateError("apply_op: unknown operation");
}

std::size_t ActiveSet::active_features() const {
  return static_cast<std::size_t>(std::count(features.begin(), features.end(), true));
}

std::size_t ActiveSet::active_pairs() const {
  return static_cast<std::size_t>(std::count(pairs.begin(), pairs.end(), true));
}

ActiveSet prune(const Genome& genome) {
  genome.check();
  ActiveSet s;
  for (double a : genome.alpha) s.features.push_back(a != 0.0);
  for (double b : genome.beta) s.pairs.push_back(b != 0.0);
  if (s.active_features() == 0 && s.active_pairs() == 0) {
    log::warn("prune: every relevance is zero; the model reduces to its output bias");
  }
  return s;
}

Var build_input(Tape& tape, const std::vector<Var>& features, const Genome& genome, Var alpha, Var beta,
                const OperationVars& params, const ActiveSet* active) {
  genome.check();
  const std::size_t m = genome.fields;
  if (features.size() != m) throw ConfigError(fmt::format("build_input: {} feature blocks for {} fields", features.size(), m));
  const Matrix& first = tape.value(features[0]);
  for (Var f : features) {
    const Matrix& v = tape.value(f);
    if (v.rows() != first.rows() || v.cols() != first.cols()) throw ConfigError("build_input: feature blocks differ in shape");
  }
  if (tape.value(alpha).size() != static_cast<Index>(m) || tape.value(beta).size() != static_cast<Index>(genome.pairs())) {
    throw ConfigError("build_input: relevance vectors do not match the genome");
  }
  if (active && (active->features.size() != m || active->pairs.size() != genome.pairs())) {
    throw ConfigError("build_input: active set does not match the genome");
  }
  const Index rows = first.rows();
  const Index dim = first.cols();
  std::vector<Var> blocks;
  blocks.reserve(m + genome.pairs());
  Var zeros;
  auto zero_block = [&] {
    if (!zeros.valid()) zeros = tape.constant(Matrix::Zero(rows, dim));
    return zeros;
  };
  for (std::size_t i = 0; i < m; ++i) {
    if (active && !active->features[i]) {
      blocks.push_back(zero_block());
    } else {
      blocks.push_back(tape.scale(features[i], alpha, static_cast<Index>(i)));
    }
  }
  for (std::size_t k = 0; k < genome.pairs(); ++k) {
    if (active && !active->pairs[k]) {
      blocks.push_back(zero_block());
      continue;
    }
    const auto [i, j] = pair_at(k, m);
    const Var g = apply_op(tape, genome.ops[k], features[i], features[j], params);
    blocks.push_back(tape.scale(g, beta, static_cast<Index>(k)));
  }
  return tape.concat_cols(blocks);
}

// ---------------------------------------------------------------- gene maps

GeneMap gene_map(const Genome& genome, const std::vector<std::string>& names) {
  genome.check();
  const std::size_t m = genome.fields;
  if (names.size() != m) throw ConfigError(fmt::format("gene_map: {} names for {} fields", names.size(), m));
  GeneMap map;
  map.names = names;
  map.codes.assign(m * m, -1);
  map.intensity.assign(m * m, 0.0);
  double max_beta = 0.0;
  for (double b : genome.beta) max_beta = std::max(max_beta, std::abs(b));
  double max_alpha = 0.0;
  for (double a : genome.alpha) max_alpha = std::max(max_alpha, std::abs(a));
  for (std::size_t k = 0; k < genome.pairs(); ++k) {
    const auto [i, j] = pair_at(k, m);
    const double b = genome.beta[k];
    const int code = b == 0.0 ? -1 : static_cast<int>(genome.ops[k]);
    const double level = max_beta > 0.0 ? std::abs(b) / max_beta : 0.0;
    map.codes[i * m + j] = map.codes[j * m + i] = code;
    map.intensity[i * m + j] = map.intensity[j * m + i] = level;
  }
  for (std::size_t i = 0; i < m; ++i) {
    map.intensity[i * m + i] = max_alpha > 0.0 ? std::abs(genome.alpha[i]) / max_alpha : 0.0;
  }
  return map;
}

std::string gene_map_csv(const GeneMap& map) {
  const std::size_t m = map.fields();
  std::string out;
  for (std::size_t i = 0; i < m; ++i) out += (i ? "," : "") + map.names[i];
  out += "\n";
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) out += fmt::format("{}{}", j ? "," : "", map.code(i, j));
    out += "\n";
  }
  out += "\n";
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) out += fmt::format("{}{:.6f}", j ? "," : "", map.level(i, j));
    out += "\n";
  }
  return out;
}

GeneMap parse_gene_map_csv(std::string_view text) {
  std::vector<std::string> lines;
  std::istringstream in{std::string(text)};
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  if (lines.empty()) throw DataError("gene map: empty input");
  GeneMap map;
  for (auto name : csv::split(lines[0])) map.names.emplace_back(csv::trim(name));
  const std::size_t m = map.names.size();
  if (lines.size() < 2 * m + 2 || !csv::trim(lines[m + 1]).empty()) {
    throw DataError(fmt::format("gene map: expected {} code rows, a blank line and {} intensity rows", m, m));
  }
  for (std::size_t i = 0; i < m; ++i) {
    const auto cells = csv::split(lines[1 + i]);
    if (cells.size() != m) throw DataError(fmt::format("gene map: code row {} has {} cells", i, cells.size()));
    for (auto c : cells) {
      long v = 0;
      if (!csv::parse_long(c, v) || v < -1 || v > 3) throw DataError(fmt::format("gene map: bad code '{}'", c));
      map.codes.push_back(static_cast<int>(v));
    }
  }
  for (std::size_t i = 0; i < m; ++i) {
    const auto cells = csv::split(lines[m + 2 + i]);
    if (cells.size() != m) throw DataError(fmt::format("gene map: intensity row {} has {} cells", i, cells.size()));
    for (auto c : cells) {
      double v = 0.0;
      if (!csv::parse_double(c, v) || v < 0.0 || v > 1.0) throw DataError(fmt::format("gene map: bad intensity '{}'", c));
      map.intensity.push_back(v);
    }
  }
  return map;
}

Rgb gene_color(int code, double intensity, bool diagonal) {
  Rgb base{255, 255, 255};
  if (diagonal) {
    base = {64, 64, 64};
  } else {
    switch (code) {
      case 0: base = {255, 0, 0}; break;
      case 1: base = {0, 255, 0}; break;
      case 2: base = {255, 255, 0}; break;
      case 3: base = {0, 0, 255}; break;
      default: return Rgb{255, 255, 255};
    }
  }
  const double level = std::clamp(intensity, 0.0, 1.0);
  auto fade = [level](std::uint8_t c) {
    return static_cast<std::uint8_t>(std::lround(255.0 - level * (255.0 - static_cast<double>(c))));
  };
  return Rgb{fade(base.r), fade(base.g), fade(base.b)};
}

std::string gene_map_ppm(const GeneMap& map, int cell) {
  if (cell <= 0) throw ConfigError("gene_map_ppm: cell size must be positive");
  const std::size_t m = map.fields();
  const std::size_t side = m * static_cast<std::size_t>(cell);
  std::string out = fmt::format("P6\n{} {}\n255\n", side, side);
  out.reserve(out.size() + side * side * 3);
  for (std::size_t y = 0; y < side; ++y) {
    const std::size_t i = y / static_cast<std::size_t>(cell);
    for (std::size_t x = 0; x < side; ++x) {
      const std::size_t j = x / static_cast<std::size_t>(cell);
      const Rgb c = gene_color(map.code(i, j), map.level(i, j), i == j);
      out.push_back(static_cast<char>(c.r));
      out.push_back(static_cast<char>(c.g));
      out.push_back(static_cast<char>(c.b));
    }
  }
  return out;
}

}  // namespace mces
