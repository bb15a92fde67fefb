#include "c2g/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace c2g {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapConst = Eigen::Map<const RowMatrix>;
using MapMut = Eigen::Map<RowMatrix>;

void require_matrix(const Tensor& t, const char* op) {
  if (t.rank() != 2) {
    throw ShapeError(std::string(op) + ": expected a matrix, got " + shape_str(t.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
}

void accumulate(const Tensor& t, std::span<const double> g) {
  if (t.requires_grad()) t.impl()->accumulate(g);
}

std::span<double> grad_of(const Tensor& t) { return t.impl()->grad_buffer(); }

std::size_t last_extent(const Tensor& t) { return t.shape().back(); }

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw ShapeError("matmul: inner extents differ for " + shape_str(a.shape()) + " x " +
                     shape_str(b.shape()));
  }
  std::vector<double> out(m * n);
  MapMut(out.data(), m, n).noalias() =
      MapConst(a.data().data(), m, k) * MapConst(b.data().data(), k, n);
  return detail::make_result("matmul", {m, n}, std::move(out), {a, b},
                             [a, b, m, k, n](std::span<const double> g) {
                               MapConst gm(g.data(), m, n);
                               if (a.requires_grad()) {
                                 MapMut(grad_of(a).data(), m, k).noalias() +=
                                     gm * MapConst(b.data().data(), k, n).transpose();
                               }
                               if (b.requires_grad()) {
                                 MapMut(grad_of(b).data(), k, n).noalias() +=
                                     MapConst(a.data().data(), m, k).transpose() * gm;
                               }
                             });
}

Tensor transpose(const Tensor& x) {
  require_matrix(x, "transpose");
  const std::size_t m = x.dim(0), n = x.dim(1);
  std::vector<double> out(m * n);
  auto in = x.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = in[i * n + j];
  return detail::make_result("transpose", {n, m}, std::move(out), {x},
                             [x, m, n](std::span<const double> g) {
                               auto gx = grad_of(x);
                               for (std::size_t i = 0; i < m; ++i)
                                 for (std::size_t j = 0; j < n; ++j) gx[i * n + j] += g[j * m + i];
                             });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw ShapeError("reshape: " + shape_str(x.shape()) + " cannot become " + shape_str(shape));
  }
  return detail::make_result("reshape", std::move(shape), x.values(), {x},
                             [x](std::span<const double> g) { accumulate(x, g); });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  return detail::make_result("add", a.shape(), std::move(out), {a, b},
                             [a, b](std::span<const double> g) {
                               accumulate(a, g);
                               accumulate(b, g);
                             });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
  return detail::make_result("sub", a.shape(), std::move(out), {a, b},
                             [a, b](std::span<const double> g) {
                               accumulate(a, g);
                               if (b.requires_grad()) {
                                 auto gb = grad_of(b);
                                 for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
                               }
                             });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  return detail::make_result("mul", a.shape(), std::move(out), {a, b},
                             [a, b](std::span<const double> g) {
                               if (a.requires_grad()) {
                                 auto ga = grad_of(a);
                                 for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * b.data()[i];
                               }
                               if (b.requires_grad()) {
                                 auto gb = grad_of(b);
                                 for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * a.data()[i];
                               }
                             });
}

Tensor scale(const Tensor& x, double factor) {
  std::vector<double> out(x.values());
  for (auto& v : out) v *= factor;
  return detail::make_result("scale", x.shape(), std::move(out), {x},
                             [x, factor](std::span<const double> g) {
                               auto gx = grad_of(x);
                               for (std::size_t i = 0; i < g.size(); ++i) gx[i] += factor * g[i];
                             });
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  require_matrix(x, "add_bias");
  const std::size_t m = x.dim(0), n = x.dim(1);
  if (bias.numel() != n) {
    throw ShapeError("add_bias: bias " + shape_str(bias.shape()) + " does not match " +
                     shape_str(x.shape()));
  }
  std::vector<double> out(x.values());
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] += bias.data()[j];
  return detail::make_result("add_bias", x.shape(), std::move(out), {x, bias},
                             [x, bias, m, n](std::span<const double> g) {
                               accumulate(x, g);
                               if (bias.requires_grad()) {
                                 auto gb = grad_of(bias);
                                 for (std::size_t i = 0; i < m; ++i)
                                   for (std::size_t j = 0; j < n; ++j) gb[j] += g[i * n + j];
                               }
                             });
}

Tensor add_identity(const Tensor& x) {
  require_matrix(x, "add_identity");
  if (x.dim(0) != x.dim(1)) throw ShapeError("add_identity: not square " + shape_str(x.shape()));
  const std::size_t n = x.dim(0);
  std::vector<double> out(x.values());
  for (std::size_t i = 0; i < n; ++i) out[i * n + i] += 1.0;
  return detail::make_result("add_identity", x.shape(), std::move(out), {x},
                             [x](std::span<const double> g) { accumulate(x, g); });
}

Tensor relu(const Tensor& x) {
  std::vector<double> out(x.values());
  for (auto& v : out) v = v > 0.0 ? v : 0.0;
  return detail::make_result("relu", x.shape(), std::move(out), {x},
                             [x](std::span<const double> g) {
                               auto gx = grad_of(x);
                               auto in = x.data();
                               for (std::size_t i = 0; i < g.size(); ++i)
                                 if (in[i] > 0.0) gx[i] += g[i];
                             });
}

Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.data()) total += v;
  return detail::make_result("sum", {1}, {total}, {x}, [x](std::span<const double> g) {
    auto gx = grad_of(x);
    for (auto& v : gx) v += g[0];
  });
}

Tensor mean(const Tensor& x) {
  double total = 0.0;
  for (double v : x.data()) total += v;
  const double inv = 1.0 / static_cast<double>(x.numel());
  return detail::make_result("mean", {1}, {total * inv}, {x}, [x, inv](std::span<const double> g) {
    auto gx = grad_of(x);
    for (auto& v : gx) v += g[0] * inv;
  });
}

namespace {

void check_tau(double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) {
    throw ParameterError("temperature must be positive and finite, got " + std::to_string(tau));
  }
}

// Row-wise softmax of v/tau into out.
void softmax_rows(std::span<const double> v, std::size_t c, double tau, std::span<double> out) {
  const std::size_t rows = v.size() / c;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = v.data() + r * c;
    double* o = out.data() + r * c;
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < c; ++j) peak = std::max(peak, in[j] / tau);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      o[j] = std::exp(in[j] / tau - peak);
      z += o[j];
    }
    for (std::size_t j = 0; j < c; ++j) o[j] /= z;
  }
}

}  // namespace

Tensor softened_softmax(const Tensor& logits, double tau) {
  check_tau(tau);
  const std::size_t c = last_extent(logits);
  std::vector<double> out(logits.numel());
  softmax_rows(logits.data(), c, tau, out);
  std::vector<double> probs = out;
  return detail::make_result(
      "softened_softmax", logits.shape(), std::move(out), {logits},
      [logits, probs = std::move(probs), c, tau](std::span<const double> g) {
        auto gx = grad_of(logits);
        for (std::size_t r = 0; r < probs.size() / c; ++r) {
          const double* p = probs.data() + r * c;
          const double* gr = g.data() + r * c;
          double dot = 0.0;
          for (std::size_t j = 0; j < c; ++j) dot += gr[j] * p[j];
          for (std::size_t j = 0; j < c; ++j) gx[r * c + j] += p[j] * (gr[j] - dot) / tau;
        }
      });
}

Tensor log_softmax(const Tensor& logits, double tau) {
  check_tau(tau);
  const std::size_t c = last_extent(logits);
  const std::size_t rows = logits.numel() / c;
  std::vector<double> out(logits.numel());
  std::vector<double> probs(logits.numel());
  auto in = logits.data();
  for (std::size_t r = 0; r < rows; ++r) {
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < c; ++j) peak = std::max(peak, in[r * c + j] / tau);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) z += std::exp(in[r * c + j] / tau - peak);
    const double lse = peak + std::log(z);
    for (std::size_t j = 0; j < c; ++j) {
      out[r * c + j] = in[r * c + j] / tau - lse;
      probs[r * c + j] = std::exp(out[r * c + j]);
    }
  }
  return detail::make_result(
      "log_softmax", logits.shape(), std::move(out), {logits},
      [logits, probs = std::move(probs), c, rows, tau](std::span<const double> g) {
        auto gx = grad_of(logits);
        for (std::size_t r = 0; r < rows; ++r) {
          double total = 0.0;
          for (std::size_t j = 0; j < c; ++j) total += g[r * c + j];
          for (std::size_t j = 0; j < c; ++j)
            gx[r * c + j] += (g[r * c + j] - probs[r * c + j] * total) / tau;
        }
      });
}

Tensor cross_entropy(const Tensor& logits, std::span<const int> labels) {
  require_matrix(logits, "cross_entropy");
  const std::size_t b = logits.dim(0), c = logits.dim(1);
  if (labels.size() != b) {
    throw ShapeError("cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                     shape_str(logits.shape()));
  }
  for (std::size_t i = 0; i < b; ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= c) {
      throw std::out_of_range("cross_entropy: label " + std::to_string(labels[i]) + " at row " +
                              std::to_string(i) + " outside [0, " + std::to_string(c) + ")");
    }
  }
  std::vector<double> probs(logits.numel());
  softmax_rows(logits.data(), c, 1.0, probs);
  double total = 0.0;
  auto in = logits.data();
  for (std::size_t i = 0; i < b; ++i) {
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < c; ++j) peak = std::max(peak, in[i * c + j]);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) z += std::exp(in[i * c + j] - peak);
    total += peak + std::log(z) - in[i * c + static_cast<std::size_t>(labels[i])];
  }
  std::vector<int> owned(labels.begin(), labels.end());
  return detail::make_result(
      "cross_entropy", {1}, {total / static_cast<double>(b)}, {logits},
      [logits, probs = std::move(probs), owned = std::move(owned), b, c](std::span<const double> g) {
        auto gx = grad_of(logits);
        const double w = g[0] / static_cast<double>(b);
        for (std::size_t i = 0; i < b; ++i) {
          for (std::size_t j = 0; j < c; ++j) {
            double target = static_cast<std::size_t>(owned[i]) == j ? 1.0 : 0.0;
            gx[i * c + j] += w * (probs[i * c + j] - target);
          }
        }
      });
}

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> rows) {
  require_matrix(x, "gather_rows");
  const std::size_t m = x.dim(0), n = x.dim(1);
  std::vector<double> out(rows.size() * n);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= m) throw std::out_of_range("gather_rows: row " + std::to_string(rows[r]));
    std::copy_n(x.data().begin() + static_cast<std::ptrdiff_t>(rows[r] * n), n,
                out.begin() + static_cast<std::ptrdiff_t>(r * n));
  }
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return detail::make_result("gather_rows", {rows.size(), n}, std::move(out), {x},
                             [x, idx = std::move(idx), n](std::span<const double> g) {
                               auto gx = grad_of(x);
                               for (std::size_t r = 0; r < idx.size(); ++r)
                                 for (std::size_t j = 0; j < n; ++j) gx[idx[r] * n + j] += g[r * n + j];
                             });
}

Tensor gather_columns(const Tensor& x, std::span<const std::size_t> cols) {
  require_matrix(x, "gather_columns");
  const std::size_t m = x.dim(0), n = x.dim(1), k = cols.size();
  for (auto c : cols) {
    if (c >= n) throw std::out_of_range("gather_columns: column " + std::to_string(c));
  }
  std::vector<double> out(m * k);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < k; ++j) out[i * k + j] = x.data()[i * n + cols[j]];
  std::vector<std::size_t> idx(cols.begin(), cols.end());
  return detail::make_result("gather_columns", {m, k}, std::move(out), {x},
                             [x, idx = std::move(idx), m, n](std::span<const double> g) {
                               auto gx = grad_of(x);
                               const std::size_t k = idx.size();
                               for (std::size_t i = 0; i < m; ++i)
                                 for (std::size_t j = 0; j < k; ++j) gx[i * n + idx[j]] += g[i * k + j];
                             });
}

std::size_t ConvGeometry::out_h(std::size_t h) const {
  if (h + 2 * padding < kernel_h || stride == 0) return 0;
  return (h + 2 * padding - kernel_h) / stride + 1;
}

std::size_t ConvGeometry::out_w(std::size_t w) const {
  if (w + 2 * padding < kernel_w || stride == 0) return 0;
  return (w + 2 * padding - kernel_w) / stride + 1;
}

Tensor im2col(const Tensor& x, const ConvGeometry& geo) {
  if (x.rank() != 4) throw ShapeError("im2col: expected [b×c×h×w], got " + shape_str(x.shape()));
  const std::size_t b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t oh = geo.out_h(h), ow = geo.out_w(w);
  if (oh == 0 || ow == 0) {
    throw ShapeError("im2col: kernel " + std::to_string(geo.kernel_h) + "x" +
                     std::to_string(geo.kernel_w) + " larger than padded input " +
                     shape_str(x.shape()));
  }
  const std::size_t cols = c * geo.kernel_h * geo.kernel_w;
  const std::size_t rows = b * oh * ow;

  // Flat source index per (row, col); -1 marks zero padding.
  std::vector<std::ptrdiff_t> source(rows * cols, -1);
  for (std::size_t n = 0; n < b; ++n)
    for (std::size_t oy = 0; oy < oh; ++oy)
      for (std::size_t ox = 0; ox < ow; ++ox) {
        const std::size_t row = (n * oh + oy) * ow + ox;
        for (std::size_t ch = 0; ch < c; ++ch)
          for (std::size_t ky = 0; ky < geo.kernel_h; ++ky)
            for (std::size_t kx = 0; kx < geo.kernel_w; ++kx) {
              auto iy = static_cast<std::ptrdiff_t>(oy * geo.stride + ky) -
                        static_cast<std::ptrdiff_t>(geo.padding);
              auto ix = static_cast<std::ptrdiff_t>(ox * geo.stride + kx) -
                        static_cast<std::ptrdiff_t>(geo.padding);
              if (iy < 0 || ix < 0 || iy >= static_cast<std::ptrdiff_t>(h) ||
                  ix >= static_cast<std::ptrdiff_t>(w))
                continue;
              const std::size_t col = (ch * geo.kernel_h + ky) * geo.kernel_w + kx;
              source[row * cols + col] = static_cast<std::ptrdiff_t>(
                  ((n * c + ch) * h + static_cast<std::size_t>(iy)) * w + static_cast<std::size_t>(ix));
            }
      }
  std::vector<double> out(rows * cols, 0.0);
  auto in = x.data();
  for (std::size_t i = 0; i < out.size(); ++i)
    if (source[i] >= 0) out[i] = in[static_cast<std::size_t>(source[i])];
  return detail::make_result("im2col", {rows, cols}, std::move(out), {x},
                             [x, source = std::move(source)](std::span<const double> g) {
                               auto gx = grad_of(x);
                               for (std::size_t i = 0; i < source.size(); ++i)
                                 if (source[i] >= 0) gx[static_cast<std::size_t>(source[i])] += g[i];
                             });
}

Tensor rows_to_nchw(const Tensor& rows, std::size_t batch, std::size_t oh, std::size_t ow) {
  require_matrix(rows, "rows_to_nchw");
  const std::size_t c = rows.dim(1);
  if (rows.dim(0) != batch * oh * ow) {
    throw ShapeError("rows_to_nchw: " + shape_str(rows.shape()) + " is not " +
                     std::to_string(batch) + "x" + std::to_string(oh) + "x" + std::to_string(ow) +
                     " pixel rows");
  }
  const std::size_t plane = oh * ow;
  std::vector<double> out(rows.numel());
  auto in = rows.data();
  for (std::size_t n = 0; n < batch; ++n)
    for (std::size_t p = 0; p < plane; ++p)
      for (std::size_t ch = 0; ch < c; ++ch) out[(n * c + ch) * plane + p] = in[(n * plane + p) * c + ch];
  return detail::make_result("rows_to_nchw", {batch, c, oh, ow}, std::move(out), {rows},
                             [rows, batch, plane, c](std::span<const double> g) {
                               auto gr = grad_of(rows);
                               for (std::size_t n = 0; n < batch; ++n)
                                 for (std::size_t p = 0; p < plane; ++p)
                                   for (std::size_t ch = 0; ch < c; ++ch)
                                     gr[(n * plane + p) * c + ch] += g[(n * c + ch) * plane + p];
                             });
}

Tensor sym_normalize(const Tensor& adjacency) {
  require_matrix(adjacency, "sym_normalize");
  const std::size_t n = adjacency.dim(0);
  if (adjacency.dim(1) != n) {
    throw ShapeError("sym_normalize: not square " + shape_str(adjacency.shape()));
  }
  auto a = adjacency.data();
  std::vector<double> degree(n, 0.0), r(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) degree[i] += a[i * n + j];
    if (!(degree[i] > 0.0)) {
      throw ParameterError("sym_normalize: node " + std::to_string(i) + " has degree " +
                           std::to_string(degree[i]));
    }
    r[i] = 1.0 / std::sqrt(degree[i]);
  }
  std::vector<double> out(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = r[i] * a[i * n + j] * r[j];
  return detail::make_result(
      "sym_normalize", {n, n}, std::move(out), {adjacency},
      [adjacency, degree = std::move(degree), r = std::move(r), n](std::span<const double> g) {
        auto a = adjacency.data();
        auto ga = grad_of(adjacency);
        std::vector<double> d_r(n, 0.0);
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < n; ++j) {
            const double gij = g[i * n + j];
            ga[i * n + j] += gij * r[i] * r[j];
            d_r[i] += gij * a[i * n + j] * r[j];
            d_r[j] += gij * r[i] * a[i * n + j];
          }
        for (std::size_t i = 0; i < n; ++i) {
          const double d_degree = d_r[i] * -0.5 * r[i] / degree[i];
          for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += d_degree;
        }
      });
}

}  // namespace c2g
