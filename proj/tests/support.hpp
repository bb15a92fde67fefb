#pragma once

// Shared helpers for unit and acceptance tests.

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "c2g/ops.hpp"
#include "c2g/tensor.hpp"

namespace c2g::testing {

inline Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0,
                            bool requires_grad = true) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = u(rng);
  return Tensor(std::move(shape), std::move(v), requires_grad);
}

// |a - n| / max(|a|, |n|, floor)
inline double relative_error(double analytic, double numeric, double floor = 1e-4) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

// Worst relative error between autodiff and central differences over every
// entry of every input. `loss` must rebuild the graph from the given inputs.
inline double gradcheck(const std::function<Tensor(const std::vector<Tensor>&)>& loss,
                        std::vector<Tensor> inputs, double h = 1e-5) {
  for (auto& t : inputs) t.clear_grad();
  loss(inputs).backward();
  std::vector<std::vector<double>> analytic;
  for (auto& t : inputs) {
    analytic.push_back(t.has_grad() ? std::vector<double>(t.grad().begin(), t.grad().end())
                                    : std::vector<double>(t.numel(), 0.0));
  }
  double worst = 0.0;
  NoGradGuard no_grad;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    auto data = inputs[k].mutable_data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double saved = data[i];
      data[i] = saved + h;
      const double up = loss(inputs).item();
      data[i] = saved - h;
      const double down = loss(inputs).item();
      data[i] = saved;
      worst = std::max(worst, relative_error(analytic[k][i], (up - down) / (2.0 * h)));
    }
  }
  return worst;
}

// Sliding-window convolution computed pixel by pixel. weight is
// [(c·kh·kw) × out_channels] with rows ordered (c, ky, kx).
inline Tensor direct_conv(const Tensor& x, const Tensor& weight, const ConvGeometry& g) {
  const std::size_t b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t oc = weight.dim(1), oh = g.out_h(h), ow = g.out_w(w);
  std::vector<double> out(b * oc * oh * ow, 0.0);
  for (std::size_t n = 0; n < b; ++n)
    for (std::size_t o = 0; o < oc; ++o)
      for (std::size_t oy = 0; oy < oh; ++oy)
        for (std::size_t ox = 0; ox < ow; ++ox) {
          double acc = 0.0;
          for (std::size_t ch = 0; ch < c; ++ch)
            for (std::size_t ky = 0; ky < g.kernel_h; ++ky)
              for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
                const auto iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.padding);
                const auto ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.padding);
                if (iy < 0 || ix < 0 || iy >= static_cast<long>(h) || ix >= static_cast<long>(w)) continue;
                const double v = x.data()[((n * c + ch) * h + static_cast<std::size_t>(iy)) * w +
                                          static_cast<std::size_t>(ix)];
                acc += v * weight.at((ch * g.kernel_h + ky) * g.kernel_w + kx, o);
              }
          out[((n * oc + o) * oh + oy) * ow + ox] = acc;
        }
  return Tensor({b, oc, oh, ow}, std::move(out));
}

inline Tensor conv_via_im2col(const Tensor& x, const Tensor& weight, const ConvGeometry& g) {
  const std::size_t oh = g.out_h(x.dim(2)), ow = g.out_w(x.dim(3));
  return rows_to_nchw(matmul(im2col(x, g), weight), x.dim(0), oh, ow);
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) worst = std::max(worst, std::abs(a.data()[i] - b.data()[i]));
  return a.shape() == b.shape() ? worst : std::numeric_limits<double>::infinity();
}

// Largest |eigenvalue| of a symmetric matrix.
inline double spectral_radius(const Tensor& p) {
  const std::size_t n = p.dim(0);
  Eigen::MatrixXd m(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) m(i, j) = p.at(i, j);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m, Eigen::EigenvaluesOnly);
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

inline double asymmetry(const Tensor& p) {
  double worst = 0.0;
  for (std::size_t i = 0; i < p.dim(0); ++i)
    for (std::size_t j = 0; j < p.dim(1); ++j) worst = std::max(worst, std::abs(p.at(i, j) - p.at(j, i)));
  return worst;
}

// Finite-difference error of every differentiable primitive on random inputs.
inline std::vector<std::pair<std::string, double>> op_gradient_errors(std::mt19937_64& rng) {
  auto a = random_tensor({3, 4}, rng);
  auto b = random_tensor({4, 2}, rng);
  auto c = random_tensor({3, 4}, rng);
  auto bias = random_tensor({4}, rng);
  auto square = random_tensor({3, 3}, rng);
  auto positive = random_tensor({3, 3}, rng, 0.1, 1.0);
  auto image = random_tensor({2, 2, 5, 4}, rng);
  auto pixels = random_tensor({12, 3}, rng);
  const std::vector<int> labels{0, 2, 1};
  const std::vector<std::size_t> rows{2, 0, 2};
  const std::vector<std::size_t> cols{3, 1};
  const ConvGeometry geometry{3, 2, 2, 1};

  using V = const std::vector<Tensor>&;
  std::vector<std::pair<std::string, double>> out;
  auto check = [&](std::string name, const std::function<Tensor(V)>& f, std::vector<Tensor> in) {
    out.emplace_back(std::move(name), gradcheck(f, std::move(in)));
  };
  check("matmul", [](V x) { return sum(mul(matmul(x[0], x[1]), matmul(x[0], x[1]))); }, {a, b});
  check("transpose", [](V x) { return sum(mul(transpose(x[0]), transpose(x[0]))); }, {a});
  check("reshape", [](V x) { return sum(mul(reshape(x[0], {6, 2}), reshape(x[0], {6, 2}))); }, {a});
  check("add/sub", [](V x) { return sum(mul(add(x[0], x[1]), sub(x[0], x[1]))); }, {a, c});
  check("mul/scale", [](V x) { return sum(mul(scale(x[0], -1.5), x[1])); }, {a, c});
  check("add_bias", [](V x) { return sum(mul(add_bias(x[0], x[1]), x[0])); }, {a, bias});
  check("add_identity", [](V x) { return sum(mul(add_identity(matmul(x[0], transpose(x[0]))), x[1])); },
        {a, square});
  check("relu/mean", [](V x) { return mean(mul(relu(x[0]), x[1])); }, {a, c});
  check("softened_softmax", [](V x) { return sum(mul(softened_softmax(x[0], 2.5), x[1])); }, {a, c});
  check("log_softmax", [](V x) { return sum(mul(log_softmax(x[0], 0.7), x[1])); }, {a, c});
  check("cross_entropy", [&](V x) { return cross_entropy(x[0], labels); }, {a});
  check("gather_rows", [&](V x) { return sum(mul(gather_rows(x[0], rows), gather_rows(x[0], rows))); }, {a});
  check("gather_columns", [&](V x) { return sum(mul(gather_columns(x[0], cols), gather_columns(x[0], cols))); },
        {a});
  check("sym_normalize", [](V x) { return sum(mul(sym_normalize(x[0]), x[1])); }, {positive, square});
  check("im2col", [&](V x) {
          auto patches = im2col(x[0], geometry);
          return sum(mul(patches, patches));
        },
        {image});
  check("rows_to_nchw", [](V x) {
          auto y = rows_to_nchw(x[0], 2, 3, 2);
          return sum(mul(y, y));
        },
        {pixels});
  return out;
}

}  // namespace c2g::testing
