#pragma once

// Differentiable primitives. Everything the two sequence models need and
// nothing more: no general broadcasting, rank <= 2.

#include <cstdint>
#include <span>
#include <vector>

#include "ovlm/random.hpp"
#include "ovlm/tensor.hpp"

namespace ovlm::ops {

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);

// a (B x n) + bias (1 x n) added to every row.
Tensor add_row(const Tensor& a, const Tensor& bias);

// a (m x k) * b (k x n)
Tensor matmul(const Tensor& a, const Tensor& b);
// a (m x k) * b^T where b is (n x k)
Tensor matmul_nt(const Tensor& a, const Tensor& b);

Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);

Tensor concat_cols(std::span<const Tensor> parts);
Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t count);
Tensor concat_rows(std::span<const Tensor> parts);

// Rows of `table` selected by `ids`; gradient scatters back.
Tensor gather_rows(const Tensor& table, std::span<const std::int64_t> ids);

// Sum of all entries, 1 x 1.
Tensor sum(const Tensor& a);

// Elementwise product with a constant mask (no gradient to the mask).
Tensor mul_constant(const Tensor& a, std::span<const double> mask);

// Inverted dropout. Identity when !training or rate == 0.
Tensor dropout(const Tensor& a, double rate, bool training, Rng& rng);

// Sum over rows r with targets[r] >= 0 of
// -log softmax(logits[r] / temperature)[targets[r]], in nats.
// Rows with a negative target are ignored.
Tensor softmax_xent(const Tensor& logits, std::span<const std::int64_t> targets,
                    double temperature = 1.0);

// Log-softmax of one row of logits at a temperature (no graph).
std::vector<double> log_softmax(std::span<const double> logits,
                                double temperature = 1.0);

}  // namespace ovlm::ops
