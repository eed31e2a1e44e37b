#include "ovlm/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace ovlm::ops {

namespace {

using detail::Node;

void require(bool cond, const char* what) {
  if (!cond) throw std::invalid_argument(what);
}

std::vector<double>* grad_of(Node& self, std::size_t i) {
  Node& p = *self.parents[i];
  return p.requires_grad ? &p.ensure_grad() : nullptr;
}

// C[m x n] += A[m x k] * B[k x n]
void gemm_nn(const double* a, const double* b, double* c, std::size_t m,
             std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    const double* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[m x n] += A[m x k] * B^T, B is [n x k]
void gemm_nt(const double* a, const double* b, double* c, std::size_t m,
             std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      const double* brow = b + j * k;
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
      crow[j] += acc;
    }
  }
}

// C[a x b] += X^T * Y, X is [m x a], Y is [m x b]
void gemm_tn(const double* x, const double* y, double* c, std::size_t m,
             std::size_t a, std::size_t b) {
  for (std::size_t r = 0; r < m; ++r) {
    const double* xrow = x + r * a;
    const double* yrow = y + r * b;
    for (std::size_t i = 0; i < a; ++i) {
      const double xv = xrow[i];
      if (xv == 0.0) continue;
      double* crow = c + i * b;
      for (std::size_t j = 0; j < b; ++j) crow[j] += xv * yrow[j];
    }
  }
}

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require(a.shape() == b.shape(), "add: shape mismatch");
  std::vector<double> out(a.values().begin(), a.values().end());
  auto bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  return Tensor::make(a.shape(), std::move(out), {a, b}, [](Node& self) {
    for (std::size_t k = 0; k < 2; ++k) {
      if (auto* g = grad_of(self, k)) {
        for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
      }
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require(a.shape() == b.shape(), "sub: shape mismatch");
  std::vector<double> out(a.values().begin(), a.values().end());
  auto bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  return Tensor::make(a.shape(), std::move(out), {a, b}, [](Node& self) {
    if (auto* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
    }
    if (auto* g = grad_of(self, 1)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require(a.shape() == b.shape(), "mul: shape mismatch");
  std::vector<double> out(a.values().begin(), a.values().end());
  auto bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  return Tensor::make(a.shape(), std::move(out), {a, b}, [](Node& self) {
    const auto& av = self.parents[0]->value;
    const auto& bv = self.parents[1]->value;
    if (auto* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * bv[i];
    }
    if (auto* g = grad_of(self, 1)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * av[i];
    }
  });
}

Tensor scale(const Tensor& a, double factor) {
  std::vector<double> out(a.values().begin(), a.values().end());
  for (double& v : out) v *= factor;
  return Tensor::make(a.shape(), std::move(out), {a}, [factor](Node& self) {
    if (auto* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * factor;
    }
  });
}

Tensor add_row(const Tensor& a, const Tensor& bias) {
  require(bias.rows() == 1 && bias.cols() == a.cols(), "add_row: bias shape mismatch");
  const std::size_t n = a.cols();
  std::vector<double> out(a.values().begin(), a.values().end());
  auto bv = bias.values();
  for (std::size_t r = 0; r < a.rows(); ++r) {
    for (std::size_t j = 0; j < n; ++j) out[r * n + j] += bv[j];
  }
  return Tensor::make(a.shape(), std::move(out), {a, bias}, [n](Node& self) {
    if (auto* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
    }
    if (auto* g = grad_of(self, 1)) {
      for (std::size_t r = 0; r < self.shape.rows; ++r) {
        for (std::size_t j = 0; j < n; ++j) (*g)[j] += self.grad[r * n + j];
      }
    }
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require(a.cols() == b.rows(), "matmul: inner dimension mismatch");
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  std::vector<double> out(m * n, 0.0);
  gemm_nn(a.values().data(), b.values().data(), out.data(), m, k, n);
  return Tensor::make({m, n}, std::move(out), {a, b}, [m, k, n](Node& self) {
    const auto& av = self.parents[0]->value;
    const auto& bv = self.parents[1]->value;
    if (auto* g = grad_of(self, 0)) gemm_nt(self.grad.data(), bv.data(), g->data(), m, n, k);
    if (auto* g = grad_of(self, 1)) gemm_tn(av.data(), self.grad.data(), g->data(), m, k, n);
  });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require(a.cols() == b.cols(), "matmul_nt: inner dimension mismatch");
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  std::vector<double> out(m * n, 0.0);
  gemm_nt(a.values().data(), b.values().data(), out.data(), m, k, n);
  return Tensor::make({m, n}, std::move(out), {a, b}, [m, k, n](Node& self) {
    const auto& av = self.parents[0]->value;
    const auto& bv = self.parents[1]->value;
    if (auto* g = grad_of(self, 0)) gemm_nn(self.grad.data(), bv.data(), g->data(), m, n, k);
    if (auto* g = grad_of(self, 1)) gemm_tn(self.grad.data(), av.data(), g->data(), m, n, k);
  });
}

Tensor sigmoid(const Tensor& a) {
  std::vector<double> out(a.size());
  auto av = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = stable_sigmoid(av[i]);
  return Tensor::make(a.shape(), std::move(out), {a}, [](Node& self) {
    if (auto* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < g->size(); ++i) {
        const double s = self.value[i];
        (*g)[i] += self.grad[i] * s * (1.0 - s);
      }
    }
  });
}

Tensor tanh(const Tensor& a) {
  std::vector<double> out(a.size());
  auto av = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(av[i]);
  return Tensor::make(a.shape(), std::move(out), {a}, [](Node& self) {
    if (auto* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < g->size(); ++i) {
        const double t = self.value[i];
        (*g)[i] += self.grad[i] * (1.0 - t * t);
      }
    }
  });
}

Tensor concat_cols(std::span<const Tensor> parts) {
  require(!parts.empty(), "concat_cols: no inputs");
  const std::size_t rows = parts[0].rows();
  std::vector<std::size_t> offsets;
  std::size_t total = 0;
  for (const auto& p : parts) {
    require(p.rows() == rows, "concat_cols: row count mismatch");
    offsets.push_back(total);
    total += p.cols();
  }
  std::vector<double> out(rows * total);
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const std::size_t c = parts[k].cols();
    auto v = parts[k].values();
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(v.data() + r * c, c, out.data() + r * total + offsets[k]);
    }
  }
  std::vector<Tensor> inputs(parts.begin(), parts.end());
  return Tensor::make({rows, total}, std::move(out), std::move(inputs),
                      [offsets, rows, total](Node& self) {
    for (std::size_t k = 0; k < self.parents.size(); ++k) {
      if (auto* g = grad_of(self, k)) {
        const std::size_t c = self.parents[k]->shape.cols;
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t j = 0; j < c; ++j) {
            (*g)[r * c + j] += self.grad[r * total + offsets[k] + j];
          }
        }
      }
    }
  });
}

Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t count) {
  require(count > 0 && begin + count <= a.cols(), "slice_cols: range out of bounds");
  const std::size_t rows = a.rows(), n = a.cols();
  std::vector<double> out(rows * count);
  auto av = a.values();
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(av.data() + r * n + begin, count, out.data() + r * count);
  }
  return Tensor::make({rows, count}, std::move(out), {a},
                      [rows, n, begin, count](Node& self) {
    if (auto* g = grad_of(self, 0)) {
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < count; ++j) {
          (*g)[r * n + begin + j] += self.grad[r * count + j];
        }
      }
    }
  });
}

Tensor concat_rows(std::span<const Tensor> parts) {
  require(!parts.empty(), "concat_rows: no inputs");
  const std::size_t cols = parts[0].cols();
  std::size_t rows = 0;
  for (const auto& p : parts) {
    require(p.cols() == cols, "concat_rows: column count mismatch");
    rows += p.rows();
  }
  std::vector<double> out;
  out.reserve(rows * cols);
  for (const auto& p : parts) out.insert(out.end(), p.values().begin(), p.values().end());
  std::vector<Tensor> inputs(parts.begin(), parts.end());
  return Tensor::make({rows, cols}, std::move(out), std::move(inputs), [](Node& self) {
    std::size_t offset = 0;
    for (std::size_t k = 0; k < self.parents.size(); ++k) {
      const std::size_t n = self.parents[k]->value.size();
      if (auto* g = grad_of(self, k)) {
        for (std::size_t i = 0; i < n; ++i) (*g)[i] += self.grad[offset + i];
      }
      offset += n;
    }
  });
}

Tensor gather_rows(const Tensor& table, std::span<const std::int64_t> ids) {
  require(!ids.empty(), "gather_rows: empty id list");
  const std::size_t n = table.cols();
  std::vector<double> out(ids.size() * n);
  auto tv = table.values();
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] < 0 || static_cast<std::size_t>(ids[r]) >= table.rows()) {
      throw std::invalid_argument("gather_rows: id " + std::to_string(ids[r]) +
                                  " out of range");
    }
    std::copy_n(tv.data() + ids[r] * n, n, out.data() + r * n);
  }
  std::vector<std::int64_t> idv(ids.begin(), ids.end());
  return Tensor::make({ids.size(), n}, std::move(out), {table},
                      [idv = std::move(idv), n](Node& self) {
    if (auto* g = grad_of(self, 0)) {
      for (std::size_t r = 0; r < idv.size(); ++r) {
        double* dst = g->data() + idv[r] * n;
        const double* src = self.grad.data() + r * n;
        for (std::size_t j = 0; j < n; ++j) dst[j] += src[j];
      }
    }
  });
}

Tensor sum(const Tensor& a) {
  double total = 0.0;
  for (double v : a.values()) total += v;
  return Tensor::make({1, 1}, {total}, {a}, [](Node& self) {
    if (auto* g = grad_of(self, 0)) {
      for (double& v : *g) v += self.grad[0];
    }
  });
}

Tensor mul_constant(const Tensor& a, std::span<const double> mask) {
  require(mask.size() == a.size(), "mul_constant: mask size mismatch");
  std::vector<double> out(a.values().begin(), a.values().end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  std::vector<double> m(mask.begin(), mask.end());
  return Tensor::make(a.shape(), std::move(out), {a}, [m = std::move(m)](Node& self) {
    if (auto* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * m[i];
    }
  });
}

Tensor dropout(const Tensor& a, double rate, bool training, Rng& rng) {
  require(rate >= 0.0 && rate < 1.0, "dropout: rate must be in [0, 1)");
  if (!training || rate == 0.0) return a;
  const double keep = 1.0 - rate;
  std::vector<double> mask(a.size());
  for (double& m : mask) m = rng.bernoulli(keep) ? 1.0 / keep : 0.0;
  return mul_constant(a, mask);
}

std::vector<double> log_softmax(std::span<const double> logits, double temperature) {
  require(temperature > 0.0, "log_softmax: temperature must be positive");
  std::vector<double> out(logits.size());
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : logits) mx = std::max(mx, v / temperature);
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = logits[i] / temperature - mx;
    z += std::exp(out[i]);
  }
  const double logz = std::log(z);
  for (double& v : out) v -= logz;
  return out;
}

Tensor softmax_xent(const Tensor& logits, std::span<const std::int64_t> targets,
                    double temperature) {
  require(temperature > 0.0, "softmax_xent: temperature must be positive");
  require(targets.size() == logits.rows(), "softmax_xent: one target per row required");
  const std::size_t rows = logits.rows(), n = logits.cols();
  auto lv = logits.values();
  // Softmax probabilities are kept for the backward pass.
  std::vector<double> probs(rows * n, 0.0);
  double loss = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    const std::int64_t t = targets[r];
    if (t == -1) continue;
    if (t < 0 || static_cast<std::size_t>(t) >= n) {
      throw std::invalid_argument("softmax_xent: target " + std::to_string(t) +
                                  " out of range");
    }
    auto lsm = log_softmax(lv.subspan(r * n, n), temperature);
    loss -= lsm[t];
    for (std::size_t j = 0; j < n; ++j) probs[r * n + j] = std::exp(lsm[j]);
  }
  std::vector<std::int64_t> tv(targets.begin(), targets.end());
  return Tensor::make({1, 1}, {loss}, {logits},
                      [probs = std::move(probs), tv = std::move(tv), n,
                       temperature](Node& self) {
    if (auto* g = grad_of(self, 0)) {
      const double up = self.grad[0] / temperature;
      for (std::size_t r = 0; r < tv.size(); ++r) {
        if (tv[r] < 0) continue;
        for (std::size_t j = 0; j < n; ++j) (*g)[r * n + j] += up * probs[r * n + j];
        (*g)[r * n + tv[r]] -= up;
      }
    }
  });
}

}  // namespace ovlm::ops
