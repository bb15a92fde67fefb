#include "c2g/checkpoint.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace c2g {

namespace {

constexpr std::array<char, 4> kMagic{'C', '2', 'G', '1'};

void put_u32(std::ostream& os, std::uint32_t v) {
  std::array<char, 4> bytes{};
  for (int i = 0; i < 4; ++i) bytes[static_cast<std::size_t>(i)] = static_cast<char>((v >> (8 * i)) & 0xFFu);
  os.write(bytes.data(), 4);
}

void put_f64(std::ostream& os, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  std::array<char, 8> bytes{};
  for (int i = 0; i < 8; ++i) bytes[static_cast<std::size_t>(i)] = static_cast<char>((bits >> (8 * i)) & 0xFFu);
  os.write(bytes.data(), 8);
}

void read_exact(std::istream& is, char* out, std::size_t n, const char* what) {
  is.read(out, static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(is.gcount()) != n) {
    throw CheckpointError(std::string("checkpoint truncated while reading ") + what);
  }
}

std::uint32_t get_u32(std::istream& is, const char* what) {
  std::array<unsigned char, 4> bytes{};
  read_exact(is, reinterpret_cast<char*>(bytes.data()), 4, what);
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | bytes[static_cast<std::size_t>(i)];
  return v;
}

double get_f64(std::istream& is) {
  std::array<unsigned char, 8> bytes{};
  read_exact(is, reinterpret_cast<char*>(bytes.data()), 8, "values");
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | bytes[static_cast<std::size_t>(i)];
  return std::bit_cast<double>(v);
}

}  // namespace

void write_checkpoint(std::ostream& os, const ModelParams& params) {
  os.write(kMagic.data(), 4);
  put_u32(os, static_cast<std::uint32_t>(params.size()));
  for (const auto& [name, value] : params) {
    put_u32(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u32(os, static_cast<std::uint32_t>(value.rank()));
    for (auto extent : value.shape()) put_u32(os, static_cast<std::uint32_t>(extent));
    for (double v : value.data()) put_f64(os, v);
  }
}

ModelParams read_checkpoint(std::istream& is) {
  std::array<char, 4> magic{};
  read_exact(is, magic.data(), 4, "magic");
  if (magic != kMagic) throw CheckpointError("not a checkpoint: bad magic bytes");
  const auto count = get_u32(is, "record count");
  ModelParams params;
  for (std::uint32_t r = 0; r < count; ++r) {
    const auto name_len = get_u32(is, "name length");
    std::string name(name_len, '\0');
    read_exact(is, name.data(), name_len, "name");
    const auto rank = get_u32(is, "rank");
    if (rank == 0) throw CheckpointError("record " + name + " has rank 0");
    Shape shape(rank);
    for (auto& extent : shape) extent = get_u32(is, "extents");
    std::vector<double> values(shape_numel(shape));
    for (auto& v : values) v = get_f64(is);
    params.add(std::move(name), Tensor(std::move(shape), std::move(values), true));
  }
  return params;
}

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw CheckpointError("cannot open " + path.string() + " for writing");
  write_checkpoint(os, params);
  if (!os) throw CheckpointError("failed writing " + path.string());
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("cannot open checkpoint " + path.string());
  return read_checkpoint(is);
}

void assign_parameters(ModelParams& target, const ModelParams& source, const std::string& prefix) {
  for (auto& [name, value] : target) {
    if (!source.contains(prefix + name)) throw CheckpointError("checkpoint lacks parameter " + prefix + name);
    const auto& src = source.get(prefix + name);
    if (src.shape() != value.shape()) {
      throw CheckpointError("parameter " + prefix + name + " has shape " + shape_str(src.shape()) +
                            ", model expects " + shape_str(value.shape()));
    }
    std::copy(src.data().begin(), src.data().end(), value.mutable_data().begin());
  }
}

}  // namespace c2g
