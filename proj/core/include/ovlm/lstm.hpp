#pragma once

#include <cstddef>

#include "ovlm/random.hpp"
#include "ovlm/tensor.hpp"

namespace ovlm {

// Gate pre-activations are laid out as four column blocks of width
// hidden_size in the order input, forget, cell, output.
struct LstmLayer {
  Tensor w_input;   // input_size x 4H
  Tensor w_hidden;  // H x 4H
  Tensor bias;      // 1 x 4H
  std::size_t input_size = 0;
  std::size_t hidden_size = 0;

  // Weights uniform in +-init_range; zero bias.
  static LstmLayer create(std::size_t input_size, std::size_t hidden_size,
                          double init_range, Rng& rng);
};

struct LstmState {
  Tensor h;  // batch x H
  Tensor c;  // batch x H

  static LstmState zeros(std::size_t batch, std::size_t hidden);
  LstmState detach() const { return {h.detach(), c.detach()}; }
};

// One step of the standard LSTM cell over a batch of rows:
//   z  = x W_input + h W_hidden + bias (+ extra)
//   c' = f * c + i * g,  h' = o * tanh(c')
// `extra`, when defined, is a batch x 4H pre-activation added to z.
LstmState lstm_step(const LstmLayer& layer, const Tensor& x,
                    const LstmState& state, const Tensor& extra = {});

}  // namespace ovlm
