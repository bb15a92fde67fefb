#include "c2g/networks.hpp"

#include <string>

namespace c2g {

void TeacherConfig::validate() const {
  if (channels == 0 || height == 0 || width == 0) throw ShapeError("teacher input extents must be positive");
  if (fc.empty()) throw ShapeError("teacher needs at least one fully connected layer");
  std::size_t c = channels, h = height, w = width;
  for (std::size_t l = 0; l < conv.size(); ++l) {
    const auto& spec = conv[l];
    if (spec.in_channels != c) {
      throw ShapeError("conv layer " + std::to_string(l) + " expects " +
                       std::to_string(spec.in_channels) + " channels, receives " + std::to_string(c));
    }
    ConvGeometry geo{spec.kernel_h, spec.kernel_w, spec.stride, spec.padding};
    h = geo.out_h(h);
    w = geo.out_w(w);
    if (h == 0 || w == 0) throw ShapeError("conv layer " + std::to_string(l) + " kernel exceeds its input");
    c = spec.out_channels;
  }
  std::size_t flat = c * h * w;
  for (std::size_t l = 0; l < fc.size(); ++l) {
    if (fc[l].in_width != flat) {
      throw ShapeError("fc layer " + std::to_string(l) + " expects width " +
                       std::to_string(fc[l].in_width) + ", receives " + std::to_string(flat));
    }
    flat = fc[l].out_width;
  }
}

TeacherConfig default_teacher_config(std::size_t channels, std::size_t height, std::size_t width,
                                     std::size_t classes, std::size_t conv_channels,
                                     std::size_t fc_hidden) {
  TeacherConfig cfg;
  cfg.channels = channels;
  cfg.height = height;
  cfg.width = width;
  cfg.conv.push_back({3, 3, channels, conv_channels, 1, 1});
  cfg.conv.push_back({3, 3, conv_channels, conv_channels, 1, 1});
  cfg.fc.push_back({conv_channels * height * width, fc_hidden});
  cfg.fc.push_back({fc_hidden, classes});
  return cfg;
}

CnnTeacher::CnnTeacher(TeacherConfig config, std::mt19937_64& rng) : config_(std::move(config)) {
  config_.validate();
  for (std::size_t l = 0; l < config_.conv.size(); ++l) {
    const auto& spec = config_.conv[l];
    const std::string prefix = "conv" + std::to_string(l);
    params.add(prefix + ".weight",
               glorot_uniform(spec.in_channels * spec.kernel_h * spec.kernel_w, spec.out_channels, rng));
    params.add(prefix + ".bias", Tensor::zeros({spec.out_channels}, true));
  }
  for (std::size_t l = 0; l < config_.fc.size(); ++l) {
    const std::string prefix = "fc" + std::to_string(l);
    params.add(prefix + ".weight", glorot_uniform(config_.fc[l].in_width, config_.fc[l].out_width, rng));
    params.add(prefix + ".bias", Tensor::zeros({config_.fc[l].out_width}, true));
  }
}

Tensor teacher_forward(const CnnTeacher& teacher, const Tensor& x) {
  const auto& cfg = teacher.config();
  Tensor h = x;
  if (x.rank() == 2 && x.dim(1) == cfg.input_width()) {
    h = reshape(x, {x.dim(0), cfg.channels, cfg.height, cfg.width});
  } else if (x.rank() != 4 || x.dim(1) != cfg.channels || x.dim(2) != cfg.height ||
             x.dim(3) != cfg.width) {
    throw ShapeError("teacher expects [b x " + std::to_string(cfg.channels) + " x " +
                     std::to_string(cfg.height) + " x " + std::to_string(cfg.width) + "], got " +
                     shape_str(x.shape()));
  }
  const std::size_t b = h.dim(0);
  for (std::size_t l = 0; l < cfg.conv.size(); ++l) {
    const auto& spec = cfg.conv[l];
    const std::string prefix = "conv" + std::to_string(l);
    ConvGeometry geo{spec.kernel_h, spec.kernel_w, spec.stride, spec.padding};
    const std::size_t oh = geo.out_h(h.dim(2)), ow = geo.out_w(h.dim(3));
    Tensor rows = matmul(im2col(h, geo), teacher.params.get(prefix + ".weight"));
    rows = relu(add_bias(rows, teacher.params.get(prefix + ".bias")));
    h = rows_to_nchw(rows, b, oh, ow);
  }
  h = reshape(h, {b, h.numel() / b});
  for (std::size_t l = 0; l < cfg.fc.size(); ++l) {
    const std::string prefix = "fc" + std::to_string(l);
    h = add_bias(matmul(h, teacher.params.get(prefix + ".weight")),
                 teacher.params.get(prefix + ".bias"));
    if (l + 1 < cfg.fc.size()) h = relu(h);
  }
  return h;
}

GnnStudent::GnnStudent(std::size_t input_width, std::size_t hidden, std::size_t classes,
                       std::mt19937_64& rng)
    : widths_{input_width, hidden, classes} {
  params.add("W1", glorot_uniform(input_width, hidden, rng));
  params.add("W2", glorot_uniform(hidden, classes, rng));
}

Tensor gnn_layer(const Tensor& propagation, const Tensor& x, const Tensor& weight, bool activate) {
  if (propagation.rank() != 2 || x.rank() != 2 || propagation.dim(0) != propagation.dim(1) ||
      propagation.dim(1) != x.dim(0)) {
    throw ShapeError("gnn_layer: propagation " + shape_str(propagation.shape()) +
                     " does not match features " + shape_str(x.shape()));
  }
  // Same product either way; aggregate on the narrower side.
  Tensor z = x.dim(1) <= weight.dim(1) ? matmul(matmul(propagation, x), weight)
                                       : matmul(propagation, matmul(x, weight));
  return activate ? relu(z) : z;
}

Tensor student_forward(const GnnStudent& student, const Tensor& propagation,
                       const Tensor& features) {
  Tensor hidden = gnn_layer(propagation, features, student.params.get("W1"), true);
  return gnn_layer(propagation, hidden, student.params.get("W2"), false);
}

Tensor student_forward(const GnnStudent& student, const GraphBatch& batch) {
  return student_forward(student, batch.propagation, batch.features);
}

}  // namespace c2g
