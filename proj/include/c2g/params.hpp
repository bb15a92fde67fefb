#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "c2g/tensor.hpp"

namespace c2g {

// Ordered, named collection of trainable tensors.
class ModelParams {
 public:
  Tensor& add(std::string name, Tensor value);
  const Tensor& get(const std::string& name) const;
  Tensor& get(const std::string& name);
  bool contains(const std::string& name) const;

  std::size_t size() const { return entries_.size(); }
  std::size_t parameter_count() const;
  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  void zero_grad();
  void clear_grad();
  void set_requires_grad(bool flag);

  // Appends every entry of `other` with `prefix` prepended to its name.
  void merge(const ModelParams& other, const std::string& prefix = "");

 private:
  std::vector<std::pair<std::string, Tensor>> entries_;
};

// Uniform in ±sqrt(6/(fan_in+fan_out)).
Tensor glorot_uniform(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng);

// p <- p - lr * grad(p), then grads are cleared.
void sgd_step(ModelParams& params, double lr);

}  // namespace c2g
