#include "mces/tape.hpp"

#include <cmath>

#include <fmt/core.h>

#include "mces/error.hpp"

namespace mces {

namespace {

std::string shape(const Matrix& m) { return fmt::format("{}x{}", m.rows(), m.cols()); }

}  // namespace

Tape::Node& Tape::node(Var v) {
  if (v.id >= nodes_.size()) throw StateError("tape: invalid variable handle");
  return nodes_[v.id];
}

const Tape::Node& Tape::node(Var v) const {
  if (v.id >= nodes_.size()) throw StateError("tape: invalid variable handle");
  return nodes_[v.id];
}

Var Tape::push(Matrix value, bool requires_grad) {
  if (!value.allFinite()) {
    throw NumericalError(fmt::format("tape: non-finite value produced at node {}", nodes_.size()));
  }
  nodes_.push_back(Node{std::move(value), Matrix(), requires_grad, nullptr});
  backward_done_ = false;
  return Var{nodes_.size() - 1};
}

Matrix& Tape::grad_of(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::check_same_shape(Var a, Var b, const char* op) const {
  const Matrix& x = node(a).value;
  const Matrix& y = node(b).value;
  if (x.rows() != y.rows() || x.cols() != y.cols()) {
    throw ConfigError(fmt::format("{}: shape mismatch {} vs {}", op, shape(x), shape(y)));
  }
}

const Matrix& Tape::value(Var v) const { return node(v).value; }

const Matrix& Tape::grad(Var v) const {
  const Node& n = node(v);
  if (!backward_done_) throw StateError("tape: gradients requested before backward");
  static const Matrix kEmpty;
  return n.grad.size() == 0 ? kEmpty : n.grad;
}

double Tape::scalar(Var v) const {
  const Matrix& m = node(v).value;
  if (m.size() != 1) throw StateError(fmt::format("tape: expected a scalar, got {}", shape(m)));
  return m(0, 0);
}

Var Tape::constant(Matrix value) { return push(std::move(value), false); }

Var Tape::parameter(Tensor& param) {
  if (param.grad.rows() != param.value.rows() || param.grad.cols() != param.value.cols()) {
    param.zero_grad();
  }
  Var out = push(param.value, true);
  Tensor* target = &param;
  nodes_[out.id].back = [this, out, target] { target->grad += nodes_[out.id].grad; };
  return out;
}

Var Tape::gather_rows(Tensor& table, std::vector<int> rows) {
  Matrix value(static_cast<Index>(rows.size()), table.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] < 0 || rows[r] >= table.rows()) {
      throw StateError(fmt::format("gather_rows: row {} outside table with {} rows", rows[r], table.rows()));
    }
    value.row(static_cast<Index>(r)) = table.value.row(rows[r]);
  }
  if (table.grad.rows() != table.rows() || table.grad.cols() != table.cols()) table.zero_grad();
  Var out = push(std::move(value), true);
  Tensor* target = &table;
  nodes_[out.id].back = [this, out, target, idx = std::move(rows)] {
    const Matrix& g = nodes_[out.id].grad;
    for (std::size_t r = 0; r < idx.size(); ++r) target->grad.row(idx[r]) += g.row(static_cast<Index>(r));
  };
  return out;
}

Var Tape::matmul(Var a, Var b) {
  const Matrix& x = node(a).value;
  const Matrix& y = node(b).value;
  if (x.cols() != y.rows()) throw ConfigError(fmt::format("matmul: {} * {}", shape(x), shape(y)));
  Matrix v = x * y;
  Var out = push(std::move(v), needs(a) || needs(b));
  nodes_[out.id].back = [this, a, b, out] {
    const Matrix& g = nodes_[out.id].grad;
    if (needs(a)) grad_of(a.id).noalias() += g * nodes_[b.id].value.transpose();
    if (needs(b)) grad_of(b.id).noalias() += nodes_[a.id].value.transpose() * g;
  };
  return out;
}

Var Tape::matmul_nt(Var a, Var b) {
  const Matrix& x = node(a).value;
  const Matrix& y = node(b).value;
  if (x.cols() != y.cols()) throw ConfigError(fmt::format("matmul_nt: {} * ({})^T", shape(x), shape(y)));
  Matrix v = x * y.transpose();
  Var out = push(std::move(v), needs(a) || needs(b));
  nodes_[out.id].back = [this, a, b, out] {
    const Matrix& g = nodes_[out.id].grad;
    if (needs(a)) grad_of(a.id).noalias() += g * nodes_[b.id].value;
    if (needs(b)) grad_of(b.id).noalias() += g.transpose() * nodes_[a.id].value;
  };
  return out;
}

Var Tape::add(Var a, Var b) {
  check_same_shape(a, b, "add");
  Var out = push(node(a).value + node(b).value, needs(a) || needs(b));
  nodes_[out.id].back = [this, a, b, out] {
    const Matrix& g = nodes_[out.id].grad;
    if (needs(a)) grad_of(a.id) += g;
    if (needs(b)) grad_of(b.id) += g;
  };
  return out;
}

Var Tape::sub(Var a, Var b) {
  check_same_shape(a, b, "sub");
  Var out = push(node(a).value - node(b).value, needs(a) || needs(b));
  nodes_[out.id].back = [this, a, b, out] {
    const Matrix& g = nodes_[out.id].grad;
    if (needs(a)) grad_of(a.id) += g;
    if (needs(b)) grad_of(b.id) -= g;
  };
  return out;
}

Var Tape::mul(Var a, Var b) {
  check_same_shape(a, b, "mul");
  Var out = push(node(a).value.cwiseProduct(node(b).value), needs(a) || needs(b));
  nodes_[out.id].back = [this, a, b, out] {
    const Matrix& g = nodes_[out.id].grad;
    if (needs(a)) grad_of(a.id) += g.cwiseProduct(nodes_[b.id].value);
    if (needs(b)) grad_of(b.id) += g.cwiseProduct(nodes_[a.id].value);
  };
  return out;
}

Var Tape::add_row(Var a, Var row) {
  const Matrix& x = node(a).value;
  const Matrix& r = node(row).value;
  if (r.rows() != 1 || r.cols() != x.cols()) {
    throw ConfigError(fmt::format("add_row: {} + row {}", shape(x), shape(r)));
  }
  Matrix v = x.rowwise() + r.row(0);
  Var out = push(std::move(v), needs(a) || needs(row));
  nodes_[out.id].back = [this, a, row, out] {
    const Matrix& g = nodes_[out.id].grad;
    if (needs(a)) grad_of(a.id) += g;
    if (needs(row)) grad_of(row.id) += g.colwise().sum();
  };
  return out;
}

Var Tape::scale(Var a, Var s, Index k) {
  const Matrix& sv = node(s).value;
  if (k < 0 || k >= sv.size()) throw StateError(fmt::format("scale: index {} outside {}", k, shape(sv)));
  const double factor = sv.data()[k];
  Var out = push(node(a).value * factor, needs(a) || needs(s));
  nodes_[out.id].back = [this, a, s, k, out] {
    const Matrix& g = nodes_[out.id].grad;
    if (needs(a)) grad_of(a.id) += g * nodes_[s.id].value.data()[k];
    if (needs(s)) grad_of(s.id).data()[k] += g.cwiseProduct(nodes_[a.id].value).sum();
  };
  return out;
}

Var Tape::sigmoid(Var a) {
  Matrix v = node(a).value.unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); });
  Var out = push(std::move(v), needs(a));
  nodes_[out.id].back = [this, a, out] {
    if (!needs(a)) return;
    const Matrix& y = nodes_[out.id].value;
    grad_of(a.id) += nodes_[out.id].grad.cwiseProduct(y.cwiseProduct((1.0 - y.array()).matrix()));
  };
  return out;
}

Var Tape::tanh(Var a) {
  Matrix v = node(a).value.array().tanh().matrix();
  Var out = push(std::move(v), needs(a));
  nodes_[out.id].back = [this, a, out] {
    if (!needs(a)) return;
    const Matrix& y = nodes_[out.id].value;
    grad_of(a.id) += nodes_[out.id].grad.cwiseProduct((1.0 - y.array().square()).matrix());
  };
  return out;
}

Var Tape::concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ConfigError("concat_cols: no inputs");
  const Index rows = node(parts[0]).value.rows();
  Index cols = 0;
  bool req = false;
  for (Var p : parts) {
    const Matrix& m = node(p).value;
    if (m.rows() != rows) throw ConfigError(fmt::format("concat_cols: row mismatch {} vs {}", m.rows(), rows));
    cols += m.cols();
    req = req || needs(p);
  }
  Matrix v(rows, cols);
  Index at = 0;
  for (Var p : parts) {
    const Matrix& m = nodes_[p.id].value;
    v.middleCols(at, m.cols()) = m;
    at += m.cols();
  }
  Var out = push(std::move(v), req);
  nodes_[out.id].back = [this, out, ids = std::vector<Var>(parts.begin(), parts.end())] {
    const Matrix& g = nodes_[out.id].grad;
    Index at = 0;
    for (Var p : ids) {
      const Index c = nodes_[p.id].value.cols();
      if (needs(p)) grad_of(p.id) += g.middleCols(at, c);
      at += c;
    }
  };
  return out;
}

Var Tape::concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ConfigError("concat_rows: no inputs");
  const Index cols = node(parts[0]).value.cols();
  Index rows = 0;
  bool req = false;
  for (Var p : parts) {
    const Matrix& m = node(p).value;
    if (m.cols() != cols) throw ConfigError(fmt::format("concat_rows: column mismatch {} vs {}", m.cols(), cols));
    rows += m.rows();
    req = req || needs(p);
  }
  Matrix v(rows, cols);
  Index at = 0;
  for (Var p : parts) {
    const Matrix& m = nodes_[p.id].value;
    v.middleRows(at, m.rows()) = m;
    at += m.rows();
  }
  Var out = push(std::move(v), req);
  nodes_[out.id].back = [this, out, ids = std::vector<Var>(parts.begin(), parts.end())] {
    const Matrix& g = nodes_[out.id].grad;
    Index at = 0;
    for (Var p : ids) {
      const Index r = nodes_[p.id].value.rows();
      if (needs(p)) grad_of(p.id) += g.middleRows(at, r);
      at += r;
    }
  };
  return out;
}

Var Tape::slice_cols(Var a, Index start, Index count) {
  const Matrix& x = node(a).value;
  if (start < 0 || count < 0 || start + count > x.cols()) {
    throw ConfigError(fmt::format("slice_cols: [{}, {}) outside {}", start, start + count, shape(x)));
  }
  Var out = push(x.middleCols(start, count), needs(a));
  nodes_[out.id].back = [this, a, start, count, out] {
    if (needs(a)) grad_of(a.id).middleCols(start, count) += nodes_[out.id].grad;
  };
  return out;
}

Var Tape::slice_rows(Var a, Index start, Index count) {
  const Matrix& x = node(a).value;
  if (start < 0 || count < 0 || start + count > x.rows()) {
    throw ConfigError(fmt::format("slice_rows: [{}, {}) outside {}", start, start + count, shape(x)));
  }
  Var out = push(x.middleRows(start, count), needs(a));
  nodes_[out.id].back = [this, a, start, count, out] {
    if (needs(a)) grad_of(a.id).middleRows(start, count) += nodes_[out.id].grad;
  };
  return out;
}

Var Tape::sum(Var a) {
  Matrix v(1, 1);
  v(0, 0) = node(a).value.sum();
  Var out = push(std::move(v), needs(a));
  nodes_[out.id].back = [this, a, out] {
    if (needs(a)) grad_of(a.id).array() += nodes_[out.id].grad(0, 0);
  };
  return out;
}

Var Tape::weighted_sq_error(Var pred, const Matrix& target, const Matrix& weight, double denom) {
  const Matrix& p = node(pred).value;
  if (target.rows() != p.rows() || target.cols() != p.cols() || weight.rows() != p.rows() ||
      weight.cols() != p.cols()) {
    throw ConfigError(fmt::format("weighted_sq_error: prediction {} target {} weight {}", shape(p), shape(target),
                                  shape(weight)));
  }
  if (!(denom > 0.0)) throw ConfigError("weighted_sq_error: denominator must be positive");
  Matrix diff = p - target;
  Matrix v(1, 1);
  v(0, 0) = weight.cwiseProduct(diff.cwiseProduct(diff)).sum() / denom;
  Var out = push(std::move(v), needs(pred));
  nodes_[out.id].back = [this, pred, out, w = weight, d = std::move(diff), denom] {
    if (needs(pred)) grad_of(pred.id) += (2.0 * nodes_[out.id].grad(0, 0) / denom) * w.cwiseProduct(d);
  };
  return out;
}

void Tape::backward(Var loss) {
  if (nodes_.empty()) throw StateError("backward called before any forward computation was recorded");
  const Node& l = node(loss);
  if (l.value.size() != 1) throw StateError(fmt::format("backward: loss must be scalar, got {}", shape(l.value)));
  for (Node& n : nodes_) n.grad.resize(0, 0);
  grad_of(loss.id)(0, 0) = 1.0;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.size() == 0 || !n.back) continue;
    n.back();
  }
  backward_done_ = true;
}

}  // namespace mces
