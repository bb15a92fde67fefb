#include "c2g/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <sstream>

namespace c2g {

namespace {

std::string trim(const std::string& s) {
  auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(const std::string& text) {
  T value{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    throw ConfigError("unparsable value '" + text + "'");
  }
  return value;
}

template <typename T>
std::vector<T> parse_list(const std::string& text, char sep = ',') {
  std::vector<T> out;
  std::istringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(parse_number<T>(trim(item)));
  if (out.empty()) throw ConfigError("empty list");
  return out;
}

bool parse_bool(const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ConfigError("unparsable boolean '" + text + "'");
}

using Setter = std::function<void(RunConfig&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table{
      {"data",
       [](RunConfig& c, const std::string& v) {
         if (v == "blobs") c.data = DataSource::blobs;
         else if (v == "idx") c.data = DataSource::idx;
         else if (v == "csv") c.data = DataSource::csv;
         else throw ConfigError("data must be blobs, idx or csv");
       }},
      {"images", [](RunConfig& c, const std::string& v) { c.images_path = v; }},
      {"labels", [](RunConfig& c, const std::string& v) { c.labels_path = v; }},
      {"csv", [](RunConfig& c, const std::string& v) { c.csv_path = v; }},
      {"label_column", [](RunConfig& c, const std::string& v) { c.label_column = v; }},
      {"blobs_n", [](RunConfig& c, const std::string& v) { c.blobs_n = parse_number<std::size_t>(v); }},
      {"blobs_classes",
       [](RunConfig& c, const std::string& v) { c.blobs_classes = parse_number<std::size_t>(v); }},
      {"blobs_d", [](RunConfig& c, const std::string& v) { c.blobs_d = parse_number<std::size_t>(v); }},
      {"blobs_spread", [](RunConfig& c, const std::string& v) { c.blobs_spread = parse_number<double>(v); }},
      {"data_seed",
       [](RunConfig& c, const std::string& v) { c.data_seed = parse_number<std::uint64_t>(v); }},
      {"test_fraction",
       [](RunConfig& c, const std::string& v) { c.test_fraction = parse_number<double>(v); }},
      {"image_shape",
       [](RunConfig& c, const std::string& v) {
         c.image_shape = parse_list<std::size_t>(v, 'x');
         if (c.image_shape.size() != 3) throw ConfigError("image_shape must be CxHxW");
       }},
      {"s", [](RunConfig& c, const std::string& v) { c.distill.s = parse_number<std::size_t>(v); }},
      {"tau", [](RunConfig& c, const std::string& v) { c.distill.tau = parse_number<double>(v); }},
      {"alpha", [](RunConfig& c, const std::string& v) { c.distill.kd_alpha = parse_number<double>(v); }},
      {"lr", [](RunConfig& c, const std::string& v) { c.distill.lr = parse_number<double>(v); }},
      {"batch_size",
       [](RunConfig& c, const std::string& v) { c.distill.batch_size = parse_number<std::size_t>(v); }},
      {"epochs", [](RunConfig& c, const std::string& v) { c.distill.epochs = parse_number<std::size_t>(v); }},
      {"teacher_epochs",
       [](RunConfig& c, const std::string& v) { c.teacher_epochs = parse_number<std::size_t>(v); }},
      {"seed", [](RunConfig& c, const std::string& v) { c.distill.seed = parse_number<std::uint64_t>(v); }},
      {"mechanism",
       [](RunConfig& c, const std::string& v) {
         if (v == "one") c.distill.mechanism = Mechanism::one_by_one;
         else if (v == "batch") c.distill.mechanism = Mechanism::batch;
         else throw ConfigError("mechanism must be one or batch");
       }},
      {"full_columns", [](RunConfig& c, const std::string& v) { c.distill.full_columns = parse_bool(v); }},
      {"student_hidden",
       [](RunConfig& c, const std::string& v) { c.student_hidden = parse_number<std::size_t>(v); }},
      {"head_hidden",
       [](RunConfig& c, const std::string& v) {
         c.head_hidden = trim(v).empty() ? std::vector<std::size_t>{} : parse_list<std::size_t>(v);
       }},
      {"teacher_channels",
       [](RunConfig& c, const std::string& v) { c.teacher_channels = parse_number<std::size_t>(v); }},
      {"teacher_fc", [](RunConfig& c, const std::string& v) { c.teacher_fc = parse_number<std::size_t>(v); }},
      {"out_dir", [](RunConfig& c, const std::string& v) { c.out_dir = v; }},
      {"tau_list", [](RunConfig& c, const std::string& v) { c.tau_list = parse_list<double>(v); }},
      {"s_list", [](RunConfig& c, const std::string& v) { c.s_list = parse_list<std::size_t>(v); }},
  };
  return table;
}

}  // namespace

void RunConfig::finalize() {
  if (distill.batch_size < 2) throw ConfigError("batch_size must be at least 2");
  distill.s = std::min(distill.s, distill.batch_size - 1);
  distill.validate();
  if (teacher_epochs == 0) throw ConfigError("teacher_epochs must be positive");
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ConfigError("test_fraction must lie in (0, 1)");
  if (student_hidden == 0 || teacher_channels == 0 || teacher_fc == 0) {
    throw ConfigError("layer widths must be positive");
  }
  for (auto w : head_hidden)
    if (w == 0) throw ConfigError("head_hidden widths must be positive");
  for (auto t : tau_list)
    if (!(t > 0.0)) throw ConfigError("tau_list entries must be positive");
  for (auto s : s_list)
    if (s == 0) throw ConfigError("s_list entries must be positive");
  if (data == DataSource::blobs && !(blobs_spread >= 0.0)) throw ConfigError("blobs_spread must be nonnegative");
  if (data == DataSource::idx && (images_path.empty() || labels_path.empty())) {
    throw ConfigError("idx data needs images and labels paths");
  }
  if (data == DataSource::csv && csv_path.empty()) throw ConfigError("csv data needs a csv path");
}

RunConfig parse_config(std::istream& is) {
  RunConfig cfg;
  std::string line;
  std::size_t number = 0;
  while (std::getline(is, line)) {
    ++number;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(number) + ": expected key = value");
    }
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    auto it = setters().find(key);
    if (it == setters().end()) {
      throw ConfigError("line " + std::to_string(number) + ": unknown key '" + key + "'");
    }
    try {
      it->second(cfg, value);
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(number) + ": " + key + ": " + e.what());
    }
  }
  cfg.finalize();
  return cfg;
}

RunConfig parse_config_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config " + path.string());
  return parse_config(is);
}

}  // namespace c2g
