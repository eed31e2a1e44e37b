#pragma once

// Reverse-mode differentiable tensors.
//
// A Tensor is a shared handle to a node holding a row-major matrix of
// doubles and a same-shape gradient accumulator. Operations in ops.hpp
// record their inputs and a backward closure whenever gradient recording
// is enabled and at least one input requires a gradient. Vectors are
// represented as 1 x n rows; rank is at most two.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace ovlm {

struct Shape {
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::size_t size() const { return rows * cols; }
  friend bool operator==(const Shape&, const Shape&) = default;
};

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  bool is_leaf() const { return !backward_fn; }
  std::vector<double>& ensure_grad();
};

}  // namespace detail

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::size_t rows, std::size_t cols,
                      bool requires_grad = false);
  static Tensor from(std::size_t rows, std::size_t cols,
                     std::vector<double> values, bool requires_grad = false);
  static Tensor row(std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  std::size_t rows() const { return node_->shape.rows; }
  std::size_t cols() const { return node_->shape.cols; }
  std::size_t size() const { return node_->shape.size(); }

  std::span<double> values() { return node_->value; }
  std::span<const double> values() const { return node_->value; }
  double& at(std::size_t r, std::size_t c) {
    return node_->value[r * node_->shape.cols + c];
  }
  double at(std::size_t r, std::size_t c) const {
    return node_->value[r * node_->shape.cols + c];
  }

  // Gradient accumulator; allocated (zero) on first access.
  std::span<double> grad() { return node_->ensure_grad(); }
  std::span<const double> grad() const { return node_->ensure_grad(); }

  // Value of a 1 x 1 tensor.
  double item() const;

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool flag) { node_->requires_grad = flag; }
  void zero_grad();

  // Populates d(this)/d(leaf) into every reachable leaf requiring a
  // gradient. Leaf gradients accumulate across calls; this tensor must be
  // 1 x 1.
  void backward() const;

  // Copy of the values detached from any graph.
  Tensor detach() const;

  detail::Node* node() const { return node_.get(); }
  const std::shared_ptr<detail::Node>& node_ptr() const { return node_; }

  static Tensor make(Shape shape, std::vector<double> values,
                     std::vector<Tensor> inputs,
                     std::function<void(detail::Node&)> backward_fn);

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

  std::shared_ptr<detail::Node> node_;
};

// Whether operations currently record a graph (thread-local).
bool grad_enabled();

// Disables graph recording on this thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

}  // namespace ovlm
