#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "ovlm/tensor.hpp"

namespace ovlm {

class SvdError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Thin SVD A = U diag(s) V^T of a row-major m x n matrix, k = min(m, n).
// Singular values are sorted descending.
struct ThinSvd {
  std::size_t rows = 0, cols = 0, rank_bound = 0;
  std::vector<double> u;               // rows x k
  std::vector<double> singular_values;  // k
  std::vector<double> v;               // cols x k
};

// One-sided Jacobi. On non-convergence retries once with 1e-12 added to
// the diagonal, then throws SvdError.
ThinSvd thin_svd(std::span<const double> a, std::size_t rows, std::size_t cols);

struct NuclearNormResult {
  double value = 0.0;
  // U V^T over the numerically nonzero singular values (rows x cols).
  std::vector<double> subgradient;
};

NuclearNormResult nuclear_norm(std::span<const double> a, std::size_t rows,
                               std::size_t cols);

namespace ops {
// Sum of singular values as a 1 x 1 tensor; backward uses U V^T.
Tensor nuclear_norm(const Tensor& a);
}  // namespace ops

}  // namespace ovlm
