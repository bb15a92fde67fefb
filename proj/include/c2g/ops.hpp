#pragma once

// Differentiable primitives. Matrices are rank-2 row-major tensors; ops that
// act "per row" treat the last axis as the feature/class axis.

#include <cstddef>
#include <span>
#include <vector>

#include "c2g/tensor.hpp"

namespace c2g {

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& x);
Tensor reshape(const Tensor& x, Shape shape);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
// x[m×n] + bias[n] broadcast over rows.
Tensor add_bias(const Tensor& x, const Tensor& bias);
Tensor add_identity(const Tensor& x);

Tensor relu(const Tensor& x);
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

// Rows softmax of logits/tau with max subtraction.
Tensor softened_softmax(const Tensor& logits, double tau);
Tensor log_softmax(const Tensor& logits, double tau = 1.0);

// Mean over rows of -log softmax(logits)[label].
Tensor cross_entropy(const Tensor& logits, std::span<const int> labels);

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> rows);
Tensor gather_columns(const Tensor& x, std::span<const std::size_t> cols);

// Patches of x[b×c×h×w] as rows [(b·oh·ow) × (c·kh·kw)], row order (b, oy, ox),
// column order (c, ky, kx).
struct ConvGeometry {
  std::size_t kernel_h = 1;
  std::size_t kernel_w = 1;
  std::size_t stride = 1;
  std::size_t padding = 0;

  std::size_t out_h(std::size_t h) const;
  std::size_t out_w(std::size_t w) const;
};

Tensor im2col(const Tensor& x, const ConvGeometry& geometry);

// [(b·oh·ow) × c] pixel rows back to [b×c×oh×ow].
Tensor rows_to_nchw(const Tensor& rows, std::size_t batch, std::size_t oh, std::size_t ow);

// Symmetric degree normalization D^{-1/2} A D^{-1/2}; every degree must be positive.
Tensor sym_normalize(const Tensor& adjacency);

}  // namespace c2g
