#include "mces/lstm.hpp"

#include <cmath>

#include <fmt/core.h>

#include "mces/error.hpp"

namespace mces {

namespace {

void fill_uniform(Matrix& m, double bound, Rng& rng) {
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = uniform(rng, -bound, bound);
}

}  // namespace

LstmParams LstmParams::zeros(Index input_size, Index hidden_size) {
  if (input_size <= 0 || hidden_size <= 0) throw ConfigError("lstm: sizes must be positive");
  return LstmParams{Tensor(4 * hidden_size, input_size), Tensor(4 * hidden_size, hidden_size),
                    Tensor(1, 4 * hidden_size)};
}

LstmParams LstmParams::random(Index input_size, Index hidden_size, Rng& rng) {
  LstmParams p = zeros(input_size, hidden_size);
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden_size));
  fill_uniform(p.input_weights.value, bound, rng);
  fill_uniform(p.recurrent_weights.value, bound, rng);
  fill_uniform(p.bias.value, bound, rng);
  return p;
}

LstmVars bind(Tape& tape, LstmParams& params) {
  return LstmVars{tape.parameter(params.input_weights), tape.parameter(params.recurrent_weights),
                  tape.parameter(params.bias), params.hidden_size()};
}

std::pair<Var, Var> lstm_cell(Tape& tape, Var preactivation, Var c_prev, Index hidden) {
  const Var i = tape.sigmoid(tape.slice_cols(preactivation, 0, hidden));
  const Var f = tape.sigmoid(tape.slice_cols(preactivation, hidden, hidden));
  const Var g = tape.tanh(tape.slice_cols(preactivation, 2 * hidden, hidden));
  const Var o = tape.sigmoid(tape.slice_cols(preactivation, 3 * hidden, hidden));
  const Var c = tape.add(tape.mul(f, c_prev), tape.mul(i, g));
  const Var h = tape.mul(o, tape.tanh(c));
  return {h, c};
}

std::pair<Var, Var> lstm_step(Tape& tape, Var x, Var h_prev, Var c_prev, const LstmVars& params) {
  const Matrix& wx = tape.value(params.input_weights);
  const Matrix& xv = tape.value(x);
  const Matrix& hv = tape.value(h_prev);
  const Matrix& cv = tape.value(c_prev);
  const Index hidden = params.hidden;
  if (xv.cols() != wx.cols() || hv.cols() != hidden || cv.cols() != hidden || hv.rows() != xv.rows() ||
      cv.rows() != xv.rows()) {
    throw ConfigError(fmt::format("lstm_step: x {}x{}, h {}x{}, c {}x{} inconsistent with input size {} and hidden {}",
                                  xv.rows(), xv.cols(), hv.rows(), hv.cols(), cv.rows(), cv.cols(), wx.cols(),
                                  hidden));
  }
  Var pre = tape.add(tape.matmul_nt(x, params.input_weights), tape.matmul_nt(h_prev, params.recurrent_weights));
  pre = tape.add_row(pre, params.bias);
  return lstm_cell(tape, pre, c_prev, hidden);
}

Var linear(Tape& tape, Var h, Var weight, Var bias) {
  const Matrix& w = tape.value(weight);
  const Matrix& hv = tape.value(h);
  if (w.cols() != hv.cols()) {
    throw ConfigError(fmt::format("linear: weight has {} columns but input has {}", w.cols(), hv.cols()));
  }
  return tape.add_row(tape.matmul_nt(h, weight), bias);
}

}  // namespace mces
