#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mces/tensor.hpp"

namespace mces {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  Matrix first_moment;
  Matrix second_moment;
  long step = 0;
  AdamConfig config;

  AdamState() = default;
  AdamState(Index rows, Index cols, AdamConfig cfg)
      : first_moment(Matrix::Zero(rows, cols)), second_moment(Matrix::Zero(rows, cols)), config(cfg) {}
  explicit AdamState(const Tensor& like, AdamConfig cfg = {}) : AdamState(like.rows(), like.cols(), cfg) {}
};

// Bias-corrected Adam step on param.value using param.grad. Throws
// NumericalError when the gradient contains NaN or Inf.
void adam_update(AdamState& state, Tensor& param);

struct GrdaConfig {
  double lr = 1e-3;  // gamma
  double c = 0.5;
  double mu = 0.8;
};

// Soft-threshold level c * lr^(1/2) * (t * lr)^mu after t updates.
double grda_threshold(const GrdaConfig& config, long step);

// Generalized regularized dual averaging over a vector of gated scalars.
// Each coordinate keeps its own accumulator a = w0 - lr * sum(g) and step
// counter, so single coordinates can be reset (mutation) or copied from a
// parent (crossover). The emitted weight is sign(a) * max(|a| - tau_t, 0)
// and is exactly +0.0 whenever clipped.
class GrdaState {
 public:
  GrdaState() = default;
  GrdaState(std::size_t size, double initial, GrdaConfig config);

  std::size_t size() const { return accumulator_.size(); }
  const GrdaConfig& config() const { return config_; }
  void set_config(const GrdaConfig& config);

  double accumulator(std::size_t i) const { return accumulator_.at(i); }
  long step(std::size_t i) const { return steps_.at(i); }

  // One update with gradient `grad`; writes the new weights to `weights`.
  void update(std::span<const double> grad, std::span<double> weights);

  // Current output weight of coordinate i without advancing.
  double weight(std::size_t i) const;

  void reset(std::size_t i, double initial);
  void copy_coordinate(std::size_t i, const GrdaState& from, std::size_t j);
  // Sets raw accumulator and step count (checkpoint restore).
  void restore(std::size_t i, double accumulator, long step);

 private:
  std::vector<double> accumulator_;
  std::vector<long> steps_;
  GrdaConfig config_;
};

// Scalar soft-threshold used by GrdaState.
double soft_threshold(double value, double threshold);

}  // namespace mces
