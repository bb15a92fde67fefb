#pragma once

// Checkpoint layout (all integers uint32 little-endian):
//   "C2G1" | record count | per record: name length, name bytes, rank,
//   extents..., values as float64 little-endian.

#include <filesystem>
#include <iosfwd>
#include <stdexcept>

#include "c2g/params.hpp"

namespace c2g {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void write_checkpoint(std::ostream& os, const ModelParams& params);
ModelParams read_checkpoint(std::istream& is);

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params);
ModelParams load_checkpoint(const std::filesystem::path& path);

// Copies values from `source` into same-named, same-shaped entries of `target`.
void assign_parameters(ModelParams& target, const ModelParams& source, const std::string& prefix = "");

}  // namespace c2g
