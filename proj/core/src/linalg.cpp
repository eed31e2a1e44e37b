#include "ovlm/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace ovlm {

namespace {

constexpr int kMaxSweeps = 80;

// Jacobi on the columns of g (m x n, m >= n). Returns false on
// non-convergence. On success g holds U * diag(s) and v the right vectors.
bool jacobi_columns(std::vector<double>& g, std::vector<double>& v,
                    std::size_t m, std::size_t n) {
  v.assign(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;
  const double eps = std::numeric_limits<double>::epsilon();
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        double alpha = 0.0, beta = 0.0, gamma = 0.0;
        for (std::size_t r = 0; r < m; ++r) {
          const double gp = g[r * n + p], gq = g[r * n + q];
          alpha += gp * gp;
          beta += gq * gq;
          gamma += gp * gq;
        }
        if (!std::isfinite(alpha) || !std::isfinite(beta) || !std::isfinite(gamma)) {
          return false;
        }
        if (gamma == 0.0 || std::abs(gamma) <= eps * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) /
                         (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t r = 0; r < m; ++r) {
          const double gp = g[r * n + p], gq = g[r * n + q];
          g[r * n + p] = c * gp - s * gq;
          g[r * n + q] = s * gp + c * gq;
        }
        for (std::size_t r = 0; r < n; ++r) {
          const double vp = v[r * n + p], vq = v[r * n + q];
          v[r * n + p] = c * vp - s * vq;
          v[r * n + q] = s * vp + c * vq;
        }
      }
    }
    if (!rotated) return true;
  }
  return false;
}

// SVD for m >= n.
bool tall_svd(std::span<const double> a, std::size_t m, std::size_t n, ThinSvd& out) {
  std::vector<double> g(a.begin(), a.end());
  std::vector<double> v;
  if (!jacobi_columns(g, v, m, n)) return false;

  std::vector<double> s(n);
  for (std::size_t j = 0; j < n; ++j) {
    double acc = 0.0;
    for (std::size_t r = 0; r < m; ++r) acc += g[r * n + j] * g[r * n + j];
    s[j] = std::sqrt(acc);
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return s[x] > s[y]; });

  out.rows = m;
  out.cols = n;
  out.rank_bound = n;
  out.singular_values.resize(n);
  out.u.assign(m * n, 0.0);
  out.v.assign(n * n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t j = order[k];
    out.singular_values[k] = s[j];
    for (std::size_t r = 0; r < n; ++r) out.v[r * n + k] = v[r * n + j];
    if (s[j] > 0.0) {
      for (std::size_t r = 0; r < m; ++r) out.u[r * n + k] = g[r * n + j] / s[j];
    }
  }
  return true;
}

ThinSvd svd_once(std::span<const double> a, std::size_t rows, std::size_t cols, bool& ok) {
  ThinSvd out;
  if (rows >= cols) {
    ok = tall_svd(a, rows, cols, out);
    return out;
  }
  // A^T = U' S V'^T  =>  A = V' S U'^T
  std::vector<double> at(rows * cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) at[c * rows + r] = a[r * cols + c];
  }
  ThinSvd t;
  ok = tall_svd(at, cols, rows, t);
  out.rows = rows;
  out.cols = cols;
  out.rank_bound = rows;
  out.singular_values = std::move(t.singular_values);
  out.u = std::move(t.v);
  out.v = std::move(t.u);
  return out;
}

}  // namespace

ThinSvd thin_svd(std::span<const double> a, std::size_t rows, std::size_t cols) {
  if (a.size() != rows * cols || rows == 0 || cols == 0) {
    throw std::invalid_argument("thin_svd: bad matrix dimensions");
  }
  bool ok = false;
  ThinSvd out = svd_once(a, rows, cols, ok);
  if (ok) return out;
  std::vector<double> jittered(a.begin(), a.end());
  for (std::size_t i = 0; i < std::min(rows, cols); ++i) jittered[i * cols + i] += 1e-12;
  out = svd_once(jittered, rows, cols, ok);
  if (!ok) throw SvdError("thin_svd: Jacobi iteration did not converge");
  return out;
}

NuclearNormResult nuclear_norm(std::span<const double> a, std::size_t rows,
                               std::size_t cols) {
  const ThinSvd svd = thin_svd(a, rows, cols);
  const std::size_t k = svd.rank_bound;
  NuclearNormResult res;
  res.subgradient.assign(rows * cols, 0.0);
  const double smax = svd.singular_values.empty() ? 0.0 : svd.singular_values[0];
  const double tol = static_cast<double>(std::max(rows, cols)) *
                     std::numeric_limits<double>::epsilon() * smax;
  for (std::size_t i = 0; i < k; ++i) {
    const double s = svd.singular_values[i];
    res.value += s;
    if (s <= tol || s == 0.0) continue;
    for (std::size_t r = 0; r < rows; ++r) {
      const double ur = svd.u[r * k + i];
      for (std::size_t c = 0; c < cols; ++c) {
        res.subgradient[r * cols + c] += ur * svd.v[c * k + i];
      }
    }
  }
  return res;
}

Tensor ops::nuclear_norm(const Tensor& a) {
  auto res = ovlm::nuclear_norm(a.values(), a.rows(), a.cols());
  return Tensor::make({1, 1}, {res.value}, {a},
                      [sub = std::move(res.subgradient)](detail::Node& self) {
    auto& parent = *self.parents[0];
    if (!parent.requires_grad) return;
    auto& g = parent.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[0] * sub[i];
  });
}

}  // namespace ovlm
