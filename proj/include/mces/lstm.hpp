#pragma once

#include <utility>

#include "mces/rng.hpp"
#include "mces/tape.hpp"
#include "mces/tensor.hpp"

namespace mces {

// Single-layer LSTM weights. Gate blocks are stacked in the order
// input, forget, candidate, output along the first axis of the weights.
struct LstmParams {
  Tensor input_weights;      // 4H x input_size
  Tensor recurrent_weights;  // 4H x H
  Tensor bias;               // 1 x 4H

  Index input_size() const { return input_weights.cols(); }
  Index hidden_size() const { return recurrent_weights.cols(); }

  static LstmParams zeros(Index input_size, Index hidden_size);
  // Uniform in [-1/sqrt(H), 1/sqrt(H)].
  static LstmParams random(Index input_size, Index hidden_size, Rng& rng);
};

// LstmParams bound to a tape for one forward pass.
struct LstmVars {
  Var input_weights;
  Var recurrent_weights;
  Var bias;
  Index hidden = 0;
};

LstmVars bind(Tape& tape, LstmParams& params);

// One recurrence step on a batch of rows: x is B x in, h_prev and c_prev are B x H.
// Returns (h, c).
std::pair<Var, Var> lstm_step(Tape& tape, Var x, Var h_prev, Var c_prev, const LstmVars& params);

// The gate nonlinearity half of lstm_step, for callers that precompute the
// input projection x W^T + b for many steps at once.
std::pair<Var, Var> lstm_cell(Tape& tape, Var preactivation, Var c_prev, Index hidden);

// y = h W^T + b with W stored as (out x H) and b as (1 x out).
Var linear(Tape& tape, Var h, Var weight, Var bias);

}  // namespace mces
