#pragma once

#include <Eigen/Dense>

namespace mces {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Index = Eigen::Index;

// Dense 2-D trainable array. Vectors are stored as 1 x n rows.
struct Tensor {
  Matrix value;
  Matrix grad;

  Tensor() = default;
  Tensor(Index rows, Index cols) : value(Matrix::Zero(rows, cols)), grad(Matrix::Zero(rows, cols)) {}
  explicit Tensor(Matrix v) : value(std::move(v)), grad(Matrix::Zero(value.rows(), value.cols())) {}

  Index rows() const { return value.rows(); }
  Index cols() const { return value.cols(); }
  Index size() const { return value.size(); }

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
  bool finite() const { return value.allFinite() && (grad.size() == 0 || grad.allFinite()); }
};

}  // namespace mces
