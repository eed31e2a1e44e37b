#include "ovlm/tensor.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_set>

namespace ovlm {

namespace {
thread_local bool g_grad_enabled = true;
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) {
  g_grad_enabled = false;
}
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

std::vector<double>& detail::Node::ensure_grad() {
  if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  return grad;
}

Tensor Tensor::zeros(std::size_t rows, std::size_t cols, bool requires_grad) {
  return from(rows, cols, std::vector<double>(rows * cols, 0.0), requires_grad);
}

Tensor Tensor::from(std::size_t rows, std::size_t cols,
                    std::vector<double> values, bool requires_grad) {
  if (rows == 0 || cols == 0) {
    throw std::invalid_argument("Tensor: dimensions must be positive");
  }
  if (values.size() != rows * cols) {
    throw std::invalid_argument("Tensor: value count does not match shape");
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = {rows, cols};
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  if (requires_grad) node->ensure_grad();
  return Tensor(std::move(node));
}

Tensor Tensor::row(std::vector<double> values, bool requires_grad) {
  const std::size_t n = values.size();
  return from(1, n, std::move(values), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from(1, 1, {value}, requires_grad);
}

double Tensor::item() const {
  if (size() != 1) throw std::invalid_argument("item() on a non-scalar tensor");
  return node_->value[0];
}

void Tensor::zero_grad() {
  auto& g = node_->ensure_grad();
  std::fill(g.begin(), g.end(), 0.0);
}

Tensor Tensor::detach() const {
  return from(rows(), cols(), node_->value, false);
}

Tensor Tensor::make(Shape shape, std::vector<double> values,
                    std::vector<Tensor> inputs,
                    std::function<void(detail::Node&)> backward_fn) {
  auto node = std::make_shared<detail::Node>();
  node->shape = shape;
  node->value = std::move(values);
  if (g_grad_enabled) {
    const bool needs = std::any_of(inputs.begin(), inputs.end(),
                                   [](const Tensor& t) { return t.requires_grad(); });
    if (needs) {
      node->requires_grad = true;
      node->parents.reserve(inputs.size());
      for (auto& in : inputs) node->parents.push_back(in.node_);
      node->backward_fn = std::move(backward_fn);
    }
  }
  return Tensor(std::move(node));
}

void Tensor::backward() const {
  if (size() != 1) {
    throw std::invalid_argument("backward: root must be a 1 x 1 tensor");
  }
  if (!node_->requires_grad) return;

  // Iterative post-order DFS gives a topological order (inputs first).
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> visited;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      detail::Node* p = n->parents[next++].get();
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  // Interior gradients are per-call; leaf gradients accumulate.
  for (auto* n : order) {
    if (!n->is_leaf()) {
      auto& g = n->ensure_grad();
      std::fill(g.begin(), g.end(), 0.0);
    }
  }
  if (node_->is_leaf()) {
    node_->ensure_grad()[0] += 1.0;
    return;
  }
  node_->ensure_grad()[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* n = *it;
    if (!n->is_leaf()) n->backward_fn(*n);
  }
}

}  // namespace ovlm
