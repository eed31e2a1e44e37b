#pragma once

#include <span>
#include <string>
#include <vector>

#include "ovlm/tensor.hpp"

namespace ovlm {

// A named trainable tensor. The weight decay of its parameter group
// realizes a spherical Gaussian prior (L2) on its entries.
struct Parameter {
  std::string name;
  Tensor tensor;
  double weight_decay = 0.0;
};

class OptimState {
 public:
  OptimState(double learning_rate, double clip_norm);

  double learning_rate() const { return learning_rate_; }
  double clip_norm() const { return clip_norm_; }

 private:
  double learning_rate_;
  double clip_norm_;
};

struct UpdateReport {
  double grad_norm = 0.0;     // global norm before clipping
  double clipped_norm = 0.0;  // global norm actually applied
  bool applied = false;       // false when a non-finite gradient was found
};

// Global-norm clipping followed by p <- p - lr * (grad + decay * p).
// Gradients are zeroed afterwards, also when the update is aborted.
UpdateReport sgd_update(std::span<Parameter> params, const OptimState& state);

// Sum over parameters of 0.5 * decay * ||p||^2.
double decay_penalty(std::span<const Parameter> params);

}  // namespace ovlm
