#pragma once

// CNN teacher (im2col convolutions + fully connected layers) and the two-layer
// GNN student Z = relu(P X W1), logits = P Z W2.

#include <cstddef>
#include <random>
#include <vector>

#include "c2g/graph_head.hpp"
#include "c2g/ops.hpp"
#include "c2g/params.hpp"

namespace c2g {

struct ConvSpec {
  std::size_t kernel_h = 3;
  std::size_t kernel_w = 3;
  std::size_t in_channels = 1;
  std::size_t out_channels = 8;
  std::size_t stride = 1;
  std::size_t padding = 1;
};

struct FcSpec {
  std::size_t in_width = 0;
  std::size_t out_width = 0;
};

struct TeacherConfig {
  std::size_t channels = 1;
  std::size_t height = 1;
  std::size_t width = 1;
  std::vector<ConvSpec> conv;
  std::vector<FcSpec> fc;

  std::size_t input_width() const { return channels * height * width; }
  std::size_t class_count() const { return fc.empty() ? 0 : fc.back().out_width; }
  // Throws ShapeError when layer extents do not chain.
  void validate() const;
};

// Two 3x3 same-padding conv layers followed by two fully connected layers.
TeacherConfig default_teacher_config(std::size_t channels, std::size_t height, std::size_t width,
                                     std::size_t classes, std::size_t conv_channels = 8,
                                     std::size_t fc_hidden = 64);

class CnnTeacher {
 public:
  CnnTeacher() = default;
  CnnTeacher(TeacherConfig config, std::mt19937_64& rng);

  const TeacherConfig& config() const { return config_; }
  ModelParams params;

 private:
  TeacherConfig config_;
};

// x is [b×c×h×w] or flattened [b×(c·h·w)]; returns pre-softmax logits.
Tensor teacher_forward(const CnnTeacher& teacher, const Tensor& x);

class GnnStudent {
 public:
  GnnStudent() = default;
  GnnStudent(std::size_t input_width, std::size_t hidden, std::size_t classes,
             std::mt19937_64& rng);

  const std::vector<std::size_t>& layer_widths() const { return widths_; }
  ModelParams params;

 private:
  std::vector<std::size_t> widths_;
};

Tensor gnn_layer(const Tensor& propagation, const Tensor& x, const Tensor& weight, bool activate);
Tensor student_forward(const GnnStudent& student, const GraphBatch& batch);
Tensor student_forward(const GnnStudent& student, const Tensor& propagation,
                       const Tensor& features);

}  // namespace c2g
