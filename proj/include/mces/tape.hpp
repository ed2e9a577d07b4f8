#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "mces/tensor.hpp"

namespace mces {

// Handle to a node recorded on a Tape.
struct Var {
  static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  std::size_t id = kNone;
  bool valid() const { return id != kNone; }
};

// Reverse-mode computation record. A tape is built for one forward pass and
// discarded after backward; parameters bound with parameter() or
// gather_rows() receive accumulated gradients in Tensor::grad.
//
// Nodes hold 2-D row-major matrices. Batched sequence code uses rows for
// samples and columns for features.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  Var parameter(Tensor& param);
  // Row lookup into `table`; equivalent to one-hot rows times the table.
  Var gather_rows(Tensor& table, std::vector<int> rows);

  Var matmul(Var a, Var b);
  // a * b^T, for weights stored as (out x in).
  Var matmul_nt(Var a, Var b);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  // Adds a 1 x n row to every row of a.
  Var add_row(Var a, Var row);
  // a * s(0, k)
  Var scale(Var a, Var s, Index k);
  Var sigmoid(Var a);
  Var tanh(Var a);
  Var concat_cols(std::span<const Var> parts);
  Var concat_rows(std::span<const Var> parts);
  Var slice_cols(Var a, Index start, Index count);
  Var slice_rows(Var a, Index start, Index count);
  Var sum(Var a);
  // sum(weight .* (pred - target)^2) / denom, as a 1 x 1 node.
  Var weighted_sq_error(Var pred, const Matrix& target, const Matrix& weight, double denom);

  const Matrix& value(Var v) const;
  const Matrix& grad(Var v) const;
  double scalar(Var v) const;

  // Populates gradients of `loss` (must be 1 x 1) with respect to every
  // recorded node and bound parameter.
  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    std::function<void()> back;
  };

  Node& node(Var v);
  const Node& node(Var v) const;
  Var push(Matrix value, bool requires_grad);
  Matrix& grad_of(std::size_t id);
  bool needs(Var v) const { return nodes_[v.id].requires_grad; }
  void check_same_shape(Var a, Var b, const char* op) const;

  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

}  // namespace mces
