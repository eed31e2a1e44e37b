#include "ovlm/optim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ovlm {

OptimState::OptimState(double learning_rate, double clip_norm)
    : learning_rate_(learning_rate), clip_norm_(clip_norm) {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (!(clip_norm > 0.0)) throw std::invalid_argument("clip norm must be positive");
}

UpdateReport sgd_update(std::span<Parameter> params, const OptimState& state) {
  UpdateReport report;
  double sq = 0.0;
  for (auto& p : params) {
    for (double g : p.tensor.grad()) sq += g * g;
  }
  report.grad_norm = std::sqrt(sq);
  if (!std::isfinite(report.grad_norm)) {
    for (auto& p : params) p.tensor.zero_grad();
    return report;
  }
  double factor = 1.0;
  if (report.grad_norm > state.clip_norm()) factor = state.clip_norm() / report.grad_norm;
  report.clipped_norm = report.grad_norm * factor;

  const double lr = state.learning_rate();
  for (auto& p : params) {
    auto values = p.tensor.values();
    auto grad = p.tensor.grad();
    for (std::size_t i = 0; i < values.size(); ++i) {
      values[i] -= lr * (grad[i] * factor + p.weight_decay * values[i]);
    }
    std::fill(grad.begin(), grad.end(), 0.0);
  }
  report.applied = true;
  return report;
}

double decay_penalty(std::span<const Parameter> params) {
  double total = 0.0;
  for (const auto& p : params) {
    if (p.weight_decay == 0.0) continue;
    double sq = 0.0;
    for (double v : p.tensor.values()) sq += v * v;
    total += 0.5 * p.weight_decay * sq;
  }
  return total;
}

}  // namespace ovlm
