#include "c2g/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <random>
#include <sstream>

namespace c2g {

Tensor Dataset::rows(std::span<const std::size_t> sample_ids) const {
  const std::size_t d = feature_width();
  std::vector<double> out(sample_ids.size() * d);
  auto src = features.data();
  for (std::size_t r = 0; r < sample_ids.size(); ++r) {
    if (sample_ids[r] >= size()) throw std::out_of_range("sample id " + std::to_string(sample_ids[r]));
    std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(sample_ids[r] * d), d,
                out.begin() + static_cast<std::ptrdiff_t>(r * d));
  }
  return Tensor({sample_ids.size(), d}, std::move(out));
}

std::vector<int> Dataset::labels_of(std::span<const std::size_t> sample_ids) const {
  std::vector<int> out;
  out.reserve(sample_ids.size());
  for (auto id : sample_ids) out.push_back(labels.at(id));
  return out;
}

IdxArray read_idx(std::istream& is, std::uint32_t expected_magic) {
  std::uint64_t offset = 0;
  auto read_u32 = [&](const char* what) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (is.gcount() != 4) {
      throw ParseError(std::string("IDX truncated reading ") + what + " at offset " +
                       std::to_string(offset));
    }
    offset += 4;
    return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) |
           std::uint32_t{b[3]};
  };
  const auto magic = read_u32("magic");
  if (magic != expected_magic) {
    std::ostringstream msg;
    msg << "IDX bad magic 0x" << std::hex << magic << " at offset 0, expected 0x" << expected_magic;
    throw ParseError(msg.str());
  }
  IdxArray out;
  out.dims.resize(magic & 0xFFu);
  for (auto& dim : out.dims) dim = read_u32("dimension");
  const std::size_t count =
      std::accumulate(out.dims.begin(), out.dims.end(), std::size_t{1}, std::multiplies<>());
  out.bytes.resize(count);
  is.read(reinterpret_cast<char*>(out.bytes.data()), static_cast<std::streamsize>(count));
  if (static_cast<std::size_t>(is.gcount()) != count) {
    throw ParseError("IDX length error: expected " + std::to_string(count) + " data bytes after offset " +
                     std::to_string(offset) + ", found " + std::to_string(is.gcount()));
  }
  return out;
}

Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path) {
  std::ifstream images(images_path, std::ios::binary);
  if (!images) throw InputError("cannot open " + images_path.string());
  std::ifstream labels(labels_path, std::ios::binary);
  if (!labels) throw InputError("cannot open " + labels_path.string());
  auto img = read_idx(images, 0x00000803);
  auto lab = read_idx(labels, 0x00000801);
  if (img.dims.size() != 3) throw InputError("IDX images must be 3-D, got " + std::to_string(img.dims.size()) + " dims");
  const std::size_t n = img.dims[0];
  if (lab.dims[0] != n) {
    throw InputError("IDX image count " + std::to_string(n) + " does not match label count " +
                     std::to_string(lab.dims[0]));
  }
  if (n == 0) throw InputError("IDX file holds no samples");
  Dataset ds;
  std::vector<double> values(img.bytes.size());
  std::transform(img.bytes.begin(), img.bytes.end(), values.begin(),
                 [](std::uint8_t v) { return static_cast<double>(v) / 255.0; });
  ds.features = Tensor({n, 1, img.dims[1], img.dims[2]}, std::move(values));
  ds.labels.assign(lab.bytes.begin(), lab.bytes.end());
  ds.ids.resize(n);
  std::iota(ds.ids.begin(), ds.ids.end(), std::size_t{0});
  ds.class_count = static_cast<std::size_t>(*std::max_element(ds.labels.begin(), ds.labels.end())) + 1;
  return ds;
}

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) {
    auto first = field.find_first_not_of(" \t\r");
    auto last = field.find_last_not_of(" \t\r");
    fields.push_back(first == std::string::npos ? "" : field.substr(first, last - first + 1));
  }
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

}  // namespace

Dataset parse_csv(std::istream& is, const std::string& label_column) {
  std::string line;
  if (!std::getline(is, line)) throw ParseError("CSV is empty: missing header row");
  const auto header = split_fields(line);
  auto label_it = std::find(header.begin(), header.end(), label_column);
  if (label_it == header.end()) throw ParseError("CSV header has no column named " + label_column);
  const auto label_index = static_cast<std::size_t>(label_it - header.begin());
  const std::size_t d = header.size() - 1;
  if (d == 0) throw ParseError("CSV has no feature columns");

  std::vector<double> values;
  std::vector<int> labels;
  std::size_t row = 1;
  while (std::getline(is, line)) {
    ++row;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto fields = split_fields(line);
    if (fields.size() != header.size()) {
      throw ParseError("CSV row " + std::to_string(row) + " has " + std::to_string(fields.size()) +
                       " fields, header has " + std::to_string(header.size()));
    }
    for (std::size_t c = 0; c < fields.size(); ++c) {
      double v = 0.0;
      const auto& f = fields[c];
      auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec != std::errc() || ptr != f.data() + f.size() || f.empty() || !std::isfinite(v)) {
        throw ParseError("CSV row " + std::to_string(row) + " column " + header[c] +
                         ": not a number '" + f + "'");
      }
      if (c == label_index) {
        if (v < 0 || v != std::floor(v)) {
          throw ParseError("CSV row " + std::to_string(row) + ": label must be a nonnegative integer");
        }
        labels.push_back(static_cast<int>(v));
      } else {
        values.push_back(v);
      }
    }
  }
  const std::size_t n = labels.size();
  if (n == 0) throw ParseError("CSV has no data rows");

  for (std::size_t c = 0; c < d; ++c) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += values[i * d + c];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) var += (values[i * d + c] - mean) * (values[i * d + c] - mean);
    var /= static_cast<double>(n);
    const double sd = std::sqrt(var);
    for (std::size_t i = 0; i < n; ++i) {
      values[i * d + c] = sd > 0.0 ? (values[i * d + c] - mean) / sd : 0.0;
    }
  }
  Dataset ds;
  ds.features = Tensor({n, d}, std::move(values));
  ds.labels = std::move(labels);
  ds.ids.resize(n);
  std::iota(ds.ids.begin(), ds.ids.end(), std::size_t{0});
  ds.class_count = static_cast<std::size_t>(*std::max_element(ds.labels.begin(), ds.labels.end())) + 1;
  return ds;
}

Dataset load_csv(const std::filesystem::path& path, const std::string& label_column) {
  std::ifstream is(path);
  if (!is) throw InputError("cannot open " + path.string());
  return parse_csv(is, label_column);
}

std::vector<double> blob_mean(std::size_t label, std::size_t d) {
  std::vector<double> mean(d, 0.0);
  mean[label % d] = std::sqrt(0.5);
  return mean;
}

Dataset make_blobs(std::size_t n, std::size_t classes, std::size_t d, double spread,
                   std::uint64_t seed) {
  if (classes < 2 || n < classes) throw ParameterError("make_blobs needs n >= classes >= 2");
  if (d < classes) throw ParameterError("make_blobs needs d >= classes for distinct class means");
  if (!(spread >= 0.0)) throw ParameterError("make_blobs spread must be nonnegative");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  Dataset ds;
  std::vector<double> values(n * d);
  ds.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto label = i % classes;
    ds.labels[i] = static_cast<int>(label);
    auto mean = blob_mean(label, d);
    for (std::size_t k = 0; k < d; ++k) values[i * d + k] = mean[k] + spread * noise(rng);
  }
  ds.features = Tensor({n, d}, std::move(values));
  ds.ids.resize(n);
  std::iota(ds.ids.begin(), ds.ids.end(), std::size_t{0});
  ds.class_count = classes;
  return ds;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  // splitmix64 finalizer over the combined words
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

Split split(const Dataset& ds, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw ConfigError("test fraction must lie in (0, 1)");
  }
  const std::size_t n = ds.size();
  const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
  if (n_test == 0 || n_test >= n) {
    throw ConfigError("test fraction " + std::to_string(test_fraction) + " leaves an empty side for n=" +
                      std::to_string(n));
  }
  std::vector<std::size_t> order = ds.ids;
  std::mt19937_64 rng(mix_seed(seed, 1));
  std::shuffle(order.begin(), order.end(), rng);
  Split out;
  out.test_ids.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
  out.train_ids.assign(order.begin() + static_cast<std::ptrdiff_t>(n_test), order.end());
  std::sort(out.test_ids.begin(), out.test_ids.end());
  std::sort(out.train_ids.begin(), out.train_ids.end());
  return out;
}

std::vector<std::vector<std::size_t>> batches(std::span<const std::size_t> ids,
                                              std::size_t batch_size, std::uint64_t seed,
                                              std::uint64_t epoch) {
  if (batch_size < 2) throw ConfigError("batch size must be at least 2");
  std::vector<std::size_t> order(ids.begin(), ids.end());
  std::mt19937_64 rng(mix_seed(seed, epoch + 1000));
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    if (end - start < 2) break;
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                     order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

}  // namespace c2g
