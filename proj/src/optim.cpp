#include "mces/optim.hpp"

#include <cmath>

#include <fmt/core.h>

#include "mces/error.hpp"

namespace mces {

void adam_update(AdamState& state, Tensor& param) {
  if (state.first_moment.rows() != param.rows() || state.first_moment.cols() != param.cols() ||
      param.grad.rows() != param.rows() || param.grad.cols() != param.cols()) {
    throw ConfigError(fmt::format("adam_update: state {}x{} does not match parameter {}x{}",
                                  state.first_moment.rows(), state.first_moment.cols(), param.rows(), param.cols()));
  }
  if (!param.grad.allFinite()) {
    Index bad = 0;
    while (bad < param.grad.size() && std::isfinite(param.grad.data()[bad])) ++bad;
    throw NumericalError(fmt::format("adam_update: non-finite gradient at flat index {} (step {}, value {})", bad,
                                     state.step, param.grad.data()[bad]));
  }
  const AdamConfig& c = state.config;
  state.step += 1;
  state.first_moment = c.beta1 * state.first_moment + (1.0 - c.beta1) * param.grad;
  state.second_moment = c.beta2 * state.second_moment + (1.0 - c.beta2) * param.grad.cwiseProduct(param.grad);
  const double correction1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double correction2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  param.value.array() -= c.lr * (state.first_moment.array() / correction1) /
                         ((state.second_moment.array() / correction2).sqrt() + c.eps);
}

double grda_threshold(const GrdaConfig& config, long step) {
  if (step <= 0) return 0.0;
  return config.c * std::sqrt(config.lr) * std::pow(static_cast<double>(step) * config.lr, config.mu);
}

double soft_threshold(double value, double threshold) {
  const double magnitude = std::abs(value) - threshold;
  if (!(magnitude > 0.0)) return 0.0;
  return value < 0.0 ? -magnitude : magnitude;
}

GrdaState::GrdaState(std::size_t size, double initial, GrdaConfig config)
    : accumulator_(size, initial), steps_(size, 0), config_(config) {
  set_config(config);
}

void GrdaState::set_config(const GrdaConfig& config) {
  if (!(config.lr > 0.0)) throw ConfigError(fmt::format("gRDA learning rate must be positive, got {}", config.lr));
  if (config.c < 0.0 || config.mu < 0.0) throw ConfigError("gRDA c and mu must be non-negative");
  config_ = config;
}

void GrdaState::update(std::span<const double> grad, std::span<double> weights) {
  if (grad.size() != size() || weights.size() != size()) {
    throw ConfigError(fmt::format("grda_update: gradient size {} / weight size {} vs state size {}", grad.size(),
                                  weights.size(), size()));
  }
  for (std::size_t i = 0; i < size(); ++i) {
    if (!std::isfinite(grad[i])) {
      throw NumericalError(fmt::format("grda_update: non-finite gradient at coordinate {}", i));
    }
    accumulator_[i] -= config_.lr * grad[i];
    steps_[i] += 1;
    weights[i] = soft_threshold(accumulator_[i], grda_threshold(config_, steps_[i]));
  }
}

double GrdaState::weight(std::size_t i) const {
  return soft_threshold(accumulator_.at(i), grda_threshold(config_, steps_.at(i)));
}

void GrdaState::reset(std::size_t i, double initial) {
  accumulator_.at(i) = initial;
  steps_.at(i) = 0;
}

void GrdaState::copy_coordinate(std::size_t i, const GrdaState& from, std::size_t j) {
  accumulator_.at(i) = from.accumulator_.at(j);
  steps_.at(i) = from.steps_.at(j);
}

void GrdaState::restore(std::size_t i, double accumulator, long step) {
  if (step < 0) throw DataError(fmt::format("gRDA step count {} is negative", step));
  accumulator_.at(i) = accumulator;
  steps_.at(i) = step;
}

}  // namespace mces
