#pragma once

// Run configuration: line-based `key = value` files with `#` comments.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "c2g/distill.hpp"

namespace c2g {

enum class DataSource { blobs, idx, csv };

struct RunConfig {
  DataSource data = DataSource::blobs;
  std::filesystem::path images_path;
  std::filesystem::path labels_path;
  std::filesystem::path csv_path;
  std::string label_column = "label";

  std::size_t blobs_n = 600;
  std::size_t blobs_classes = 3;
  std::size_t blobs_d = 32;
  double blobs_spread = 0.5;
  std::uint64_t data_seed = 0;
  double test_fraction = 0.3;
  // Teacher view of flat features as c x h x w; empty means 1 x 1 x d.
  std::vector<std::size_t> image_shape;

  DistillConfig distill;
  std::size_t teacher_epochs = 200;

  std::size_t student_hidden = 256;
  std::vector<std::size_t> head_hidden{512, 256};
  std::size_t teacher_channels = 8;
  std::size_t teacher_fc = 64;

  std::filesystem::path out_dir = ".";
  std::vector<double> tau_list{1, 4, 8, 16, 32, 64};
  std::vector<std::size_t> s_list{10, 30, 50, 70, 90};

  // Clips s to batch_size - 1 and checks every field.
  void finalize();
};

RunConfig parse_config(std::istream& is);
RunConfig parse_config_file(const std::filesystem::path& path);

}  // namespace c2g
