#pragma once

#include <functional>
#include <vector>

#include "mces/rng.hpp"
#include "mces/tape.hpp"

namespace mces {

// Records the scalar loss of a model on the given tape. Must be a pure
// function of the parameter values.
using LossBuilder = std::function<Var(Tape&)>;

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t coordinates_checked = 0;
};

// Compares backward() against central differences on the listed parameters.
// Relative error per coordinate is |analytic - numeric| / max(|analytic|,
// |numeric|, 1e-12). `max_coords_per_param` == 0 checks every coordinate;
// otherwise a random subset drawn from `rng`. Throws NumericalError when two
// evaluations at identical parameters differ.
GradCheckResult grad_check(const LossBuilder& build, const std::vector<Tensor*>& params, double eps,
                           std::size_t max_coords_per_param = 0, Rng* rng = nullptr);

}  // namespace mces
