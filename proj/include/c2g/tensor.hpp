#pragma once

// Dense row-major tensors of doubles with a reverse-mode gradient tape.
//
// A Tensor is a cheap handle onto shared storage. Every op that consumes a
// tensor requiring gradients (while grad mode is enabled) records a Node on
// the result; backward() walks those nodes in reverse topological order.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "c2g/errors.hpp"

namespace c2g {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

struct TensorImpl;

// One recorded primitive. `backward` receives the gradient of the output and
// accumulates into the gradients of `inputs` that require them.
struct Node {
  std::string op;
  std::vector<std::shared_ptr<TensorImpl>> inputs;
  std::function<void(std::span<const double> out_grad)> backward;
};

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until first accumulation
  bool requires_grad = false;
  std::shared_ptr<Node> creator;

  void accumulate(std::span<const double> g);
  std::span<double> grad_buffer();
};

class Tensor {
 public:
  Tensor();
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> data,
                       bool requires_grad = false);

  const Shape& shape() const { return impl_->shape; }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const { return impl_->data.size(); }
  bool defined() const { return static_cast<bool>(impl_); }

  std::span<const double> data() const { return impl_->data; }
  std::span<double> mutable_data() { return impl_->data; }
  const std::vector<double>& values() const { return impl_->data; }
  double item() const;
  double at(std::size_t i, std::size_t j) const;

  bool requires_grad() const { return impl_->requires_grad; }
  Tensor& set_requires_grad(bool flag);

  bool has_grad() const { return !impl_->grad.empty(); }
  std::span<const double> grad() const { return impl_->grad; }
  // Sets the gradient to zeros, allocating it if absent.
  void zero_grad();
  void clear_grad();

  bool is_leaf() const { return !impl_->creator; }
  const std::shared_ptr<Node>& creator() const { return impl_->creator; }

  // Copy of the values with no tape history.
  Tensor detach() const;
  Tensor clone() const;

  // Reverse pass from a one-element loss; gradients accumulate.
  void backward() const;

  const std::shared_ptr<TensorImpl>& impl() const { return impl_; }
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}

 private:
  std::shared_ptr<TensorImpl> impl_;
};

// Ordered list of the ops reachable from a loss, producers before consumers.
struct ComputationRecord {
  std::vector<std::shared_ptr<Node>> ops;
};

ComputationRecord trace(const Tensor& loss);

// Grad mode is per thread. While disabled, ops record nothing.
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

namespace detail {

// Builds an op result. When grad mode is on and any input requires
// gradients, a Node with `backward` is attached.
Tensor make_result(std::string op, Shape shape, std::vector<double> data,
                   std::vector<Tensor> inputs,
                   std::function<void(std::span<const double>)> backward);

bool any_requires_grad(std::span<const Tensor> inputs);

}  // namespace detail

}  // namespace c2g
