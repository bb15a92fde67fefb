#include "c2g/params.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace c2g {

Tensor& ModelParams::add(std::string name, Tensor value) {
  if (contains(name)) throw std::invalid_argument("duplicate parameter name: " + name);
  entries_.emplace_back(std::move(name), std::move(value));
  return entries_.back().second;
}

const Tensor& ModelParams::get(const std::string& name) const {
  for (const auto& [key, value] : entries_)
    if (key == name) return value;
  throw std::out_of_range("no parameter named " + name);
}

Tensor& ModelParams::get(const std::string& name) {
  return const_cast<Tensor&>(std::as_const(*this).get(name));
}

bool ModelParams::contains(const std::string& name) const {
  return std::any_of(entries_.begin(), entries_.end(),
                     [&](const auto& e) { return e.first == name; });
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.second.numel();
  return n;
}

void ModelParams::zero_grad() {
  for (auto& e : entries_) e.second.zero_grad();
}

void ModelParams::clear_grad() {
  for (auto& e : entries_) e.second.clear_grad();
}

void ModelParams::set_requires_grad(bool flag) {
  for (auto& e : entries_) e.second.set_requires_grad(flag);
}

void ModelParams::merge(const ModelParams& other, const std::string& prefix) {
  for (const auto& [name, value] : other) add(prefix + name, value);
}

Tensor glorot_uniform(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  std::vector<double> values(fan_in * fan_out);
  for (auto& v : values) v = dist(rng);
  return Tensor({fan_in, fan_out}, std::move(values), true);
}

void sgd_step(ModelParams& params, double lr) {
  if (!(lr > 0.0)) throw ParameterError("learning rate must be positive");
  for (const auto& [name, value] : params) {
    if (!value.has_grad()) throw StateError("parameter " + name + " has no gradient");
  }
  for (auto& [name, value] : params) {
    auto data = value.mutable_data();
    auto grad = value.grad();
    for (std::size_t i = 0; i < data.size(); ++i) data[i] -= lr * grad[i];
    value.clear_grad();
  }
}

}  // namespace c2g
