#include "c2g/tensor.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace c2g {

namespace {
thread_local bool g_grad_enabled = true;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

void TensorImpl::accumulate(std::span<const double> g) {
  if (grad.empty()) {
    grad.assign(g.begin(), g.end());
    return;
  }
  for (std::size_t i = 0; i < g.size(); ++i) grad[i] += g[i];
}

std::span<double> TensorImpl::grad_buffer() {
  if (grad.empty()) grad.assign(data.size(), 0.0);
  return grad;
}

Tensor::Tensor() = default;

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad)
    : impl_(std::make_shared<TensorImpl>()) {
  for (auto extent : shape) {
    if (extent == 0) throw ShapeError("tensor extents must be positive, got " + shape_str(shape));
  }
  if (shape_numel(shape) != data.size()) {
    throw ShapeError("shape " + shape_str(shape) + " does not hold " + std::to_string(data.size()) +
                     " values");
  }
  impl_->shape = std::move(shape);
  impl_->data = std::move(data);
  impl_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  auto n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  auto n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor({1}, {value}, requires_grad);
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> data,
                      bool requires_grad) {
  return Tensor({rows, cols}, std::move(data), requires_grad);
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= rank()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " + shape_str(shape()));
  }
  return impl_->shape[axis];
}

double Tensor::item() const {
  if (numel() != 1) throw ShapeError("item() on non-scalar tensor " + shape_str(shape()));
  return impl_->data[0];
}

double Tensor::at(std::size_t i, std::size_t j) const {
  return impl_->data[i * impl_->shape.back() + j];
}

Tensor& Tensor::set_requires_grad(bool flag) {
  impl_->requires_grad = flag;
  return *this;
}

void Tensor::zero_grad() {
  impl_->grad.assign(impl_->data.size(), 0.0);
}

void Tensor::clear_grad() { impl_->grad.clear(); }

Tensor Tensor::detach() const {
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = impl_->shape;
  impl->data = impl_->data;
  return Tensor(std::move(impl));
}

Tensor Tensor::clone() const {
  Tensor out = detach();
  out.impl_->requires_grad = impl_->requires_grad;
  return out;
}

ComputationRecord trace(const Tensor& loss) {
  ComputationRecord record;
  if (!loss.defined() || !loss.creator()) return record;

  // Iterative post-order DFS over creator nodes.
  std::unordered_set<const Node*> visited;
  std::vector<std::pair<std::shared_ptr<Node>, std::size_t>> stack;
  stack.emplace_back(loss.creator(), 0);
  visited.insert(loss.creator().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      const auto& in = node->inputs[next++];
      if (in->creator && visited.insert(in->creator.get()).second) {
        stack.emplace_back(in->creator, 0);
      }
      continue;
    }
    record.ops.push_back(node);
    stack.pop_back();
  }
  return record;
}

void Tensor::backward() const {
  if (numel() != 1) {
    throw ShapeError("backward() needs a scalar loss, got " + shape_str(shape()));
  }
  if (!requires_grad()) throw StateError("backward() on a tensor that does not require grad");

  ComputationRecord record = trace(*this);
  if (record.ops.empty()) {
    impl_->accumulate(std::vector<double>{1.0});
    return;
  }
  impl_->grad.assign(1, 1.0);

  // Output impls are not owned by nodes; collect them by walking consumers.
  std::unordered_map<const Node*, TensorImpl*> output_of;
  output_of[impl_->creator.get()] = impl_.get();
  for (const auto& node : record.ops) {
    for (const auto& in : node->inputs) {
      if (in->creator) output_of[in->creator.get()] = in.get();
    }
  }

  for (auto it = record.ops.rbegin(); it != record.ops.rend(); ++it) {
    TensorImpl* out = output_of.at(it->get());
    if (out->grad.empty()) continue;
    (*it)->backward(out->grad);
  }

  // Intermediate gradients are not part of the contract; free them.
  for (const auto& [node, out] : output_of) out->grad.clear();
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

namespace detail {

bool any_requires_grad(std::span<const Tensor> inputs) {
  return std::any_of(inputs.begin(), inputs.end(),
                     [](const Tensor& t) { return t.requires_grad(); });
}

Tensor make_result(std::string op, Shape shape, std::vector<double> data,
                   std::vector<Tensor> inputs,
                   std::function<void(std::span<const double>)> backward) {
  Tensor out(std::move(shape), std::move(data));
  if (!g_grad_enabled || !any_requires_grad(inputs)) return out;
  auto node = std::make_shared<Node>();
  node->op = std::move(op);
  node->inputs.reserve(inputs.size());
  for (const auto& in : inputs) node->inputs.push_back(in.impl());
  node->backward = std::move(backward);
  out.impl()->creator = std::move(node);
  out.impl()->requires_grad = true;
  return out;
}

}  // namespace detail

}  // namespace c2g
