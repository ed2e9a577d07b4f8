#include "mces/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/core.h>

#include "mces/error.hpp"

namespace mces {

namespace {

double evaluate(const LossBuilder& build) {
  Tape tape;
  return tape.scalar(build(tape));
}

}  // namespace

GradCheckResult grad_check(const LossBuilder& build, const std::vector<Tensor*>& params, double eps,
                           std::size_t max_coords_per_param, Rng* rng) {
  if (!(eps >= 1e-7 && eps <= 1e-3)) throw ConfigError(fmt::format("grad_check: eps {} outside [1e-7, 1e-3]", eps));

  const double first = evaluate(build);
  const double second = evaluate(build);
  if (first != second) {
    throw NumericalError(fmt::format("grad_check: forward is not deterministic ({} vs {})", first, second));
  }

  for (Tensor* p : params) p->zero_grad();
  {
    Tape tape;
    tape.backward(build(tape));
  }
  std::vector<Matrix> analytic;
  analytic.reserve(params.size());
  for (Tensor* p : params) analytic.push_back(p->grad);

  GradCheckResult result;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor& p = *params[pi];
    std::vector<Index> coords(static_cast<std::size_t>(p.size()));
    std::iota(coords.begin(), coords.end(), Index{0});
    if (max_coords_per_param > 0 && coords.size() > max_coords_per_param) {
      if (rng == nullptr) throw ConfigError("grad_check: sampling coordinates requires an rng");
      std::shuffle(coords.begin(), coords.end(), *rng);
      coords.resize(max_coords_per_param);
    }
    for (Index k : coords) {
      double& slot = p.value.data()[k];
      const double saved = slot;
      slot = saved + eps;
      const double up = evaluate(build);
      slot = saved - eps;
      const double down = evaluate(build);
      slot = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[pi].data()[k];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-12});
      result.max_relative_error = std::max(result.max_relative_error, std::abs(a - numeric) / denom);
      ++result.coordinates_checked;
    }
  }
  return result;
}

}  // namespace mces
