#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "c2g/tensor.hpp"

namespace c2g {

// Immutable labelled samples. Features are [n×d] or [n×c×h×w]; ids are 0..n-1.
struct Dataset {
  Tensor features;
  std::vector<int> labels;
  std::vector<std::size_t> ids;
  std::size_t class_count = 0;

  std::size_t size() const { return labels.size(); }
  std::size_t feature_width() const { return features.numel() / size(); }
  // Flattened [k×d] rows for the given ids, off the tape.
  Tensor rows(std::span<const std::size_t> sample_ids) const;
  std::vector<int> labels_of(std::span<const std::size_t> sample_ids) const;
};

// Raw IDX payload: big-endian dims followed by unsigned bytes.
struct IdxArray {
  std::vector<std::size_t> dims;
  std::vector<std::uint8_t> bytes;
};

IdxArray read_idx(std::istream& is, std::uint32_t expected_magic);
Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path);

// Headered numeric CSV. Feature columns are standardized per column.
Dataset load_csv(const std::filesystem::path& path, const std::string& label_column);
Dataset parse_csv(std::istream& is, const std::string& label_column);

// Gaussian clusters around class means spaced exactly 1 apart.
Dataset make_blobs(std::size_t n, std::size_t classes, std::size_t d, double spread,
                   std::uint64_t seed);
std::vector<double> blob_mean(std::size_t label, std::size_t d);

struct Split {
  std::vector<std::size_t> train_ids;
  std::vector<std::size_t> test_ids;
};

Split split(const Dataset& ds, double test_fraction, std::uint64_t seed);

// One epoch of shuffled batches; a final batch smaller than 2 is dropped.
std::vector<std::vector<std::size_t>> batches(std::span<const std::size_t> ids,
                                              std::size_t batch_size, std::uint64_t seed,
                                              std::uint64_t epoch);

// Deterministic generator seeded from several words.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);

}  // namespace c2g
