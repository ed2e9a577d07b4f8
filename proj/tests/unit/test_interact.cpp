#include <cmath>
#include <string>
#include <vector>

#include <doctest.h>

#include "mces/error.hpp"
#include "mces/interact.hpp"
#include "mces/tape.hpp"

using namespace mces;

namespace {

Var row(Tape& t, double a, double b) { return t.constant(Matrix{{a, b}}); }

OperationParams identity_ops(Index d) {
  OperationParams p;
  p.kernel = Tensor(Matrix::Identity(d, d));
  p.concat_projection = Tensor(Matrix::Zero(d, 2 * d));
  return p;
}

}  // namespace

TEST_CASE("pair indexing is lexicographic and invertible") {
  CHECK(pair_count(4) == 6);
  CHECK(pair_index(0, 1, 4) == 0);
  CHECK(pair_index(2, 3, 4) == 5);
  CHECK(pair_index(3, 1, 4) == pair_index(1, 3, 4));
  std::size_t slot = 0;
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = i + 1; j < 5; ++j, ++slot) {
      CHECK(pair_index(i, j, 5) == slot);
      CHECK(pair_at(slot, 5) == std::make_pair(i, j));
    }
  }
}

TEST_CASE("apply_op examples") {
  OperationParams p = identity_ops(2);
  Tape t;
  const OperationVars v = bind(t, p);
  CHECK(t.value(apply_op(t, OpCode::kSum, row(t, 1, 2), row(t, 3, 4), v)) == Matrix{{4, 6}});
  CHECK(t.value(apply_op(t, OpCode::kProd, row(t, 1, 2), row(t, 3, 4), v)) == Matrix{{3, 8}});
  CHECK(t.value(apply_op(t, OpCode::kKernelProduct, row(t, 1, 2), row(t, 3, 4), v)) == Matrix{{3, 8}});
}

TEST_CASE("apply_op: concat projection is P [f_i ; f_j]") {
  OperationParams p = identity_ops(2);
  p.concat_projection.value = Matrix{{1, 0, 0, 1}, {0, 2, -1, 0}};
  Tape t;
  const OperationVars v = bind(t, p);
  // (1*1 + 4*1, 2*2 - 3) = (5, 1)
  CHECK(t.value(apply_op(t, OpCode::kConcatProject, row(t, 1, 2), row(t, 3, 4), v)) == Matrix{{5, 1}});
  CHECK_THROWS_AS(apply_op(t, OpCode::kSum, row(t, 1, 2), t.constant(Matrix::Zero(1, 3)), v), ConfigError);
}

TEST_CASE("init_genome: sizes, determinism and uniform operations") {
  Rng a(1), b(1);
  const Genome g = init_genome(3, a);
  CHECK(g.alpha.size() == 3);
  CHECK(g.beta.size() == 3);
  CHECK(g.ops.size() == 3);
  CHECK(g.alpha == std::vector<double>(3, kRelevanceInit));
  CHECK(g == init_genome(3, b));

  // Chi-square goodness of fit over 4 categories (3 dof, 99.9% ~ 16.27).
  Rng rng(77);
  const Genome big = init_genome(120, rng);
  std::vector<double> counts(kOpCount, 0.0);
  for (OpCode op : big.ops) counts[static_cast<int>(op)] += 1.0;
  const double expected = static_cast<double>(big.pairs()) / kOpCount;
  double chi2 = 0.0;
  for (double c : counts) chi2 += (c - expected) * (c - expected) / expected;
  CHECK(chi2 < 16.27);
}

TEST_CASE("build_input: layout and zero interactions") {
  Genome g;
  g.fields = 3;
  g.ops = {OpCode::kSum, OpCode::kProd, OpCode::kSum};
  g.alpha = {1.0, 2.0, 0.5};
  g.beta = {0.5, 1.0, 0.0};
  OperationParams p = identity_ops(2);
  Tape t;
  const std::vector<Var> f{row(t, 1, 2), row(t, 3, 4), row(t, 5, 6)};
  const Matrix alpha = Eigen::Map<const Matrix>(g.alpha.data(), 1, 3);
  const Matrix beta = Eigen::Map<const Matrix>(g.beta.data(), 1, 3);
  const Var x = build_input(t, f, g, t.constant(alpha), t.constant(beta), bind(t, p));
  // alpha f_1 | alpha f_2 | alpha f_3 | b12 (f1+f2) | b13 (f1*f3) | b23 (f2+f3)
  CHECK(t.value(x) == Matrix{{1, 2, 6, 8, 2.5, 3, 2, 3, 5, 12, 0, 0}});

  Genome zero = g;
  zero.alpha = {1, 1, 1};
  zero.beta = {0, 0, 0};
  const Var y = build_input(t, f, zero, t.constant(Matrix::Ones(1, 3)), t.constant(Matrix::Zero(1, 3)), bind(t, p));
  CHECK(t.value(y).rightCols(6).isZero());
}

TEST_CASE("prune: active sets equal the nonzero filter") {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    Genome g = init_genome(5, rng);
    for (double& a : g.alpha) a = coin(rng, 0.3) ? 0.0 : uniform(rng, -1, 1);
    for (double& b : g.beta) b = coin(rng, 0.5) ? 0.0 : uniform(rng, -1, 1);
    const ActiveSet s = prune(g);
    std::size_t nf = 0, np = 0;
    for (std::size_t i = 0; i < 5; ++i) {
      CHECK(s.features[i] == (g.alpha[i] != 0.0));
      nf += g.alpha[i] != 0.0;
    }
    for (std::size_t k = 0; k < g.pairs(); ++k) {
      CHECK(s.pairs[k] == (g.beta[k] != 0.0));
      np += g.beta[k] != 0.0;
    }
    CHECK(s.active_features() == nf);
    CHECK(s.active_pairs() == np);
  }
}

TEST_CASE("gene_map: single pruned pair") {
  Genome g;
  g.fields = 2;
  g.ops = {OpCode::kProd};
  g.alpha = {0.5, 0.25};
  g.beta = {0.0};
  const GeneMap m = gene_map(g, {"a", "b"});
  CHECK(m.code(0, 1) == -1);
  CHECK(m.code(1, 0) == -1);
  CHECK(m.level(0, 1) == 0.0);
  CHECK(m.level(0, 0) == 1.0);
  CHECK(m.level(1, 1) == 0.5);
}

TEST_CASE("gene_map: full m=4 genome matches hand construction") {
  Genome g;
  g.fields = 4;
  // pairs 01 02 03 12 13 23
  g.ops = {OpCode::kSum, OpCode::kProd, OpCode::kConcatProject, OpCode::kKernelProduct, OpCode::kSum, OpCode::kProd};
  g.beta = {0.2, -0.8, 0.0, 0.4, 0.1, 0.0};
  g.alpha = {1.0, -0.5, 0.0, 0.25};
  const GeneMap m = gene_map(g, {"w", "x", "y", "z"});
  const std::vector<int> codes{-1, 0, 1, -1,  //
                               0, -1, 3, 0,   //
                               1, 3, -1, -1,  //
                               -1, 0, -1, -1};
  const std::vector<double> levels{1.0, 0.25, 1.0, 0.0,  //
                                   0.25, 0.5, 0.5, 0.125,  //
                                   1.0, 0.5, 0.0, 0.0,     //
                                   0.0, 0.125, 0.0, 0.25};
  CHECK(m.codes == codes);
  for (std::size_t i = 0; i < levels.size(); ++i) CHECK(m.intensity[i] == doctest::Approx(levels[i]));
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 4; ++j) CHECK(m.code(i, j) == m.code(j, i));
  }
}

TEST_CASE("gene_map: CSV round trip") {
  Rng rng(8);
  Genome g = init_genome(5, rng);
  for (double& b : g.beta) b = coin(rng, 0.4) ? 0.0 : uniform(rng, -1, 1);
  const GeneMap m = gene_map(g, {"a", "b", "c", "d", "e"});
  const GeneMap back = parse_gene_map_csv(gene_map_csv(m));
  CHECK(back.names == m.names);
  CHECK(back.codes == m.codes);
  for (std::size_t i = 0; i < m.intensity.size(); ++i) CHECK(back.intensity[i] == doctest::Approx(m.intensity[i]).epsilon(1e-6));
  CHECK_THROWS(parse_gene_map_csv("a,b\n0\n"));
}

TEST_CASE("gene colours and PPM layout") {
  CHECK(gene_color(1, 1.0, false) == Rgb{0, 255, 0});
  CHECK(gene_color(0, 1.0, false) == Rgb{255, 0, 0});
  CHECK(gene_color(-1, 0.0, false) == Rgb{255, 255, 255});
  CHECK(gene_color(1, 0.0, false) == Rgb{255, 255, 255});

  Genome g;
  g.fields = 2;
  g.ops = {OpCode::kProd};
  g.alpha = {1.0, 1.0};
  g.beta = {1.0};
  const std::string ppm = gene_map_ppm(gene_map(g, {"a", "b"}), 4);
  const std::string header = "P6\n8 8\n255\n";
  REQUIRE(ppm.rfind(header, 0) == 0);
  CHECK(ppm.size() == header.size() + 8 * 8 * 3);
  // Top-right cell (0, 1) is pure green.
  const std::size_t px = header.size() + (0 * 8 + 6) * 3;
  CHECK(static_cast<unsigned char>(ppm[px]) == 0);
  CHECK(static_cast<unsigned char>(ppm[px + 1]) == 255);
  CHECK(static_cast<unsigned char>(ppm[px + 2]) == 0);
}
