#include "ovlm/lstm.hpp"

#include <stdexcept>

#include "ovlm/ops.hpp"

namespace ovlm {

namespace {

Tensor uniform_tensor(std::size_t rows, std::size_t cols, double range, Rng& rng) {
  std::vector<double> v(rows * cols);
  for (double& x : v) x = rng.uniform(-range, range);
  return Tensor::from(rows, cols, std::move(v), true);
}

}  // namespace

LstmLayer LstmLayer::create(std::size_t input_size, std::size_t hidden_size,
                            double init_range, Rng& rng) {
  LstmLayer layer;
  layer.input_size = input_size;
  layer.hidden_size = hidden_size;
  layer.w_input = uniform_tensor(input_size, 4 * hidden_size, init_range, rng);
  layer.w_hidden = uniform_tensor(hidden_size, 4 * hidden_size, init_range, rng);
  layer.bias = Tensor::zeros(1, 4 * hidden_size, true);
  return layer;
}

LstmState LstmState::zeros(std::size_t batch, std::size_t hidden) {
  return {Tensor::zeros(batch, hidden), Tensor::zeros(batch, hidden)};
}

LstmState lstm_step(const LstmLayer& layer, const Tensor& x,
                    const LstmState& state, const Tensor& extra) {
  const std::size_t hs = layer.hidden_size;
  if (x.cols() != layer.input_size) {
    throw std::invalid_argument("lstm_step: input width does not match layer");
  }
  if (state.h.cols() != hs || state.c.cols() != hs ||
      state.h.rows() != x.rows() || state.c.rows() != x.rows()) {
    throw std::invalid_argument("lstm_step: state shape does not match layer/batch");
  }
  Tensor z = ops::add(ops::matmul(x, layer.w_input), ops::matmul(state.h, layer.w_hidden));
  if (extra.defined()) {
    if (extra.shape() != z.shape()) {
      throw std::invalid_argument("lstm_step: extra pre-activation shape mismatch");
    }
    z = ops::add(z, extra);
  }
  z = ops::add_row(z, layer.bias);
  Tensor i = ops::sigmoid(ops::slice_cols(z, 0, hs));
  Tensor f = ops::sigmoid(ops::slice_cols(z, hs, hs));
  Tensor g = ops::tanh(ops::slice_cols(z, 2 * hs, hs));
  Tensor o = ops::sigmoid(ops::slice_cols(z, 3 * hs, hs));
  Tensor c = ops::add(ops::mul(f, state.c), ops::mul(i, g));
  Tensor h = ops::mul(o, ops::tanh(c));
  return {h, c};
}

}  // namespace ovlm
