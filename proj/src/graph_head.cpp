#include "c2g/graph_head.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <string>

#include "c2g/ops.hpp"

namespace c2g {

namespace {

std::optional<std::size_t> position_of(const DistanceRow& row) {
  if (!row.self_id) return std::nullopt;
  for (std::size_t i = 0; i < row.candidate_ids.size(); ++i)
    if (row.candidate_ids[i] == *row.self_id) return i;
  return std::nullopt;
}

void check_row(const DistanceRow& row) {
  if (row.values.size() != row.candidate_ids.size()) {
    throw ShapeError("distance row has " + std::to_string(row.values.size()) + " values for " +
                     std::to_string(row.candidate_ids.size()) + " candidates");
  }
}

std::vector<double> dense_from_selection(const RowSelection& sel, std::span<const double> values,
                                         std::size_t width) {
  std::vector<double> p(width, 0.0);
  const double s = static_cast<double>(sel.selected.size());
  if (sel.degenerate()) {
    for (auto pos : sel.selected) p[pos] = 1.0 / s;
    return p;
  }
  const double pivot = values[*sel.pivot];
  for (auto pos : sel.selected) p[pos] = (pivot - values[pos]) / sel.denominator;
  return p;
}

}  // namespace

RowSelection select_neighbors(std::span<const double> values, std::span<const std::size_t> ids,
                              std::optional<std::size_t> self_position, std::size_t s) {
  if (s == 0) throw ParameterError("sparsity s must be at least 1");
  std::vector<std::size_t> candidates;
  candidates.reserve(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (self_position && *self_position == i) continue;
    if (std::isfinite(values[i])) candidates.push_back(i);
  }
  if (candidates.empty()) throw InputError("distance row has no finite candidate distances");
  if (s > candidates.size()) {
    throw ParameterError("sparsity s=" + std::to_string(s) + " exceeds the " +
                         std::to_string(candidates.size()) + " available candidates");
  }
  const std::size_t keep = std::min(s + 1, candidates.size());
  auto closer = [&](std::size_t a, std::size_t b) {
    if (values[a] != values[b]) return values[a] < values[b];
    return ids[a] < ids[b];
  };
  std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep),
                    candidates.end(), closer);

  RowSelection sel;
  sel.selected.assign(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(s));
  if (keep > s) {
    sel.pivot = candidates[s];
    const double pivot = values[*sel.pivot];
    for (auto pos : sel.selected) sel.denominator += pivot - values[pos];
  }
  return sel;
}

std::vector<double> sparse_row(const DistanceRow& row, std::size_t s) {
  check_row(row);
  auto sel = select_neighbors(row.values, row.candidate_ids, position_of(row), s);
  return dense_from_selection(sel, row.values, row.values.size());
}

std::vector<double> project_to_simplex(std::span<const double> v) {
  if (v.empty()) throw InputError("cannot project an empty vector onto the simplex");
  std::vector<double> u(v.begin(), v.end());
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumulative = 0.0;
  double theta = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) {
    cumulative += u[j];
    const double t = (cumulative - 1.0) / static_cast<double>(j + 1);
    if (u[j] - t > 0.0) theta = t;
  }
  std::vector<double> p(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) p[i] = std::max(v[i] - theta, 0.0);
  return p;
}

namespace {

std::vector<std::size_t> valid_positions(const DistanceRow& row) {
  auto self = position_of(row);
  std::vector<std::size_t> valid;
  for (std::size_t i = 0; i < row.values.size(); ++i) {
    if (self && *self == i) continue;
    if (std::isfinite(row.values[i])) valid.push_back(i);
  }
  if (valid.empty()) throw InputError("distance row has no finite candidate distances");
  return valid;
}

}  // namespace

double steering_gamma(const DistanceRow& row, std::size_t s) {
  check_row(row);
  auto valid = valid_positions(row);
  if (s == 0 || s > valid.size()) {
    throw ParameterError("sparsity s=" + std::to_string(s) + " out of range for " +
                         std::to_string(valid.size()) + " candidates");
  }
  if (s == valid.size()) return std::numeric_limits<double>::infinity();
  std::vector<double> sorted;
  for (auto i : valid) sorted.push_back(row.values[i]);
  std::sort(sorted.begin(), sorted.end());
  double head = 0.0;
  for (std::size_t j = 0; j < s; ++j) head += sorted[j];
  return (static_cast<double>(s) * sorted[s] - head) / 2.0;
}

std::vector<double> regularized_row(const DistanceRow& row, double gamma) {
  check_row(row);
  if (!(gamma > 0.0)) throw ParameterError("trade-off gamma must be positive");
  auto valid = valid_positions(row);
  const double uniform = 1.0 / static_cast<double>(valid.size());
  std::vector<double> target(valid.size());
  for (std::size_t k = 0; k < valid.size(); ++k) {
    target[k] = std::isinf(gamma) ? uniform : uniform - row.values[valid[k]] / (2.0 * gamma);
  }
  auto projected = project_to_simplex(target);
  std::vector<double> p(row.values.size(), 0.0);
  for (std::size_t k = 0; k < valid.size(); ++k) p[valid[k]] = projected[k];
  return p;
}

std::vector<double> oracle_sparse_row(const DistanceRow& row, std::size_t s) {
  const double gamma = steering_gamma(row, s);
  if (!(gamma > 0.0)) {
    throw ParameterError("no positive trade-off steers this row to " + std::to_string(s) +
                         " neighbors (tied distances)");
  }
  return regularized_row(row, gamma);
}

SparseAffinity SparseAffinity::from_dense(const Tensor& dense) {
  if (dense.rank() != 2) throw ShapeError("affinity must be a matrix");
  SparseAffinity out;
  out.n_rows = dense.dim(0);
  out.n_cols = dense.dim(1);
  out.rows.resize(out.n_rows);
  for (std::size_t i = 0; i < out.n_rows; ++i)
    for (std::size_t j = 0; j < out.n_cols; ++j)
      if (dense.at(i, j) > 0.0) out.rows[i].emplace_back(j, dense.at(i, j));
  return out;
}

void SparseAffinity::write_csv(std::ostream& os, std::span<const std::size_t> row_ids,
                               std::span<const std::size_t> col_ids, bool header) const {
  if (row_ids.size() != n_rows || col_ids.size() != n_cols) {
    throw ShapeError("affinity id tables do not match its extents");
  }
  if (header) os << "row_id,col_id,weight\n";
  os.precision(17);
  for (std::size_t i = 0; i < n_rows; ++i)
    for (const auto& [col, weight] : rows[i]) os << row_ids[i] << ',' << col_ids[col] << ',' << weight << '\n';
}

Tensor sparse_affinity(const Tensor& distances, std::size_t s,
                       std::span<const std::size_t> column_ids,
                       std::span<const std::optional<std::size_t>> self_columns) {
  if (distances.rank() != 2) {
    throw ShapeError("sparse_affinity: expected a matrix, got " + shape_str(distances.shape()));
  }
  const std::size_t rows = distances.dim(0), cols = distances.dim(1);
  if (column_ids.size() != cols || self_columns.size() != rows) {
    throw ShapeError("sparse_affinity: id tables do not match " + shape_str(distances.shape()));
  }
  std::vector<RowSelection> selections(rows);
  std::vector<double> out(rows * cols, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    auto values = distances.data().subspan(r * cols, cols);
    selections[r] = select_neighbors(values, column_ids, self_columns[r], s);
    auto p = dense_from_selection(selections[r], values, cols);
    std::copy(p.begin(), p.end(), out.begin() + static_cast<std::ptrdiff_t>(r * cols));
  }
  std::vector<double> probs = out;
  return detail::make_result(
      "sparse_affinity", {rows, cols}, std::move(out), {distances},
      [distances, selections = std::move(selections), probs = std::move(probs), cols](
          std::span<const double> g) {
        auto gd = distances.impl()->grad_buffer();
        for (std::size_t r = 0; r < selections.size(); ++r) {
          const auto& sel = selections[r];
          if (sel.degenerate()) continue;
          const std::size_t base = r * cols;
          double weighted = 0.0, total = 0.0;
          for (auto pos : sel.selected) {
            weighted += g[base + pos] * probs[base + pos];
            total += g[base + pos];
          }
          const double inv = 1.0 / sel.denominator;
          for (auto pos : sel.selected) gd[base + pos] += (weighted - g[base + pos]) * inv;
          gd[base + *sel.pivot] +=
              (total - static_cast<double>(sel.selected.size()) * weighted) * inv;
        }
      });
}

Tensor propagation_from_directed(const Tensor& directed) {
  Tensor symmetric = scale(add(directed, transpose(directed)), 0.5);
  return sym_normalize(add_identity(symmetric));
}

DistanceHead::DistanceHead(std::size_t input_width, std::vector<std::size_t> hidden,
                           std::vector<std::size_t> train_ids, std::mt19937_64& rng)
    : input_width_(input_width), hidden_(std::move(hidden)), train_ids_(std::move(train_ids)) {
  if (train_ids_.empty()) throw ParameterError("distance head needs at least one training id");
  for (std::size_t c = 0; c < train_ids_.size(); ++c) {
    if (!column_.emplace(train_ids_[c], c).second) {
      throw ParameterError("duplicate training id " + std::to_string(train_ids_[c]));
    }
  }
  std::size_t fan_in = input_width_;
  std::vector<std::size_t> widths = hidden_;
  widths.push_back(train_ids_.size());
  for (std::size_t l = 0; l < widths.size(); ++l) {
    const std::string prefix = "layer" + std::to_string(l);
    params.add(prefix + ".weight", glorot_uniform(fan_in, widths[l], rng));
    params.add(prefix + ".bias", Tensor::zeros({widths[l]}, true));
    fan_in = widths[l];
  }
}

std::size_t DistanceHead::column_of(std::size_t id) const {
  auto it = column_.find(id);
  if (it == column_.end()) {
    throw std::out_of_range("sample " + std::to_string(id) + " has no distance-head column");
  }
  return it->second;
}

std::vector<std::size_t> DistanceHead::columns_of(std::span<const std::size_t> ids) const {
  std::vector<std::size_t> out;
  out.reserve(ids.size());
  for (auto id : ids) out.push_back(column_of(id));
  return out;
}

Tensor distance_head_forward(const DistanceHead& head, const Tensor& x) {
  if (x.rank() != 2 || x.dim(1) != head.input_width()) {
    throw ShapeError("distance head expects [b x " + std::to_string(head.input_width()) +
                     "], got " + shape_str(x.shape()));
  }
  const std::size_t layers = head.hidden().size() + 1;
  Tensor h = x;
  for (std::size_t l = 0; l < layers; ++l) {
    const std::string prefix = "layer" + std::to_string(l);
    h = add_bias(matmul(h, head.params.get(prefix + ".weight")), head.params.get(prefix + ".bias"));
    if (l + 1 < layers) h = relu(h);
  }
  return h;
}

DistanceHead euclidean_stub_head(const Tensor& train_features, std::vector<std::size_t> train_ids) {
  if (train_features.rank() != 2 || train_features.dim(0) != train_ids.size()) {
    throw ShapeError("stub head needs one feature row per training id");
  }
  const std::size_t n = train_features.dim(0), d = train_features.dim(1);
  std::mt19937_64 rng(0);
  DistanceHead head(d, {}, std::move(train_ids), rng);
  auto weight = head.params.get("layer0.weight").mutable_data();
  auto bias = head.params.get("layer0.bias").mutable_data();
  for (std::size_t j = 0; j < n; ++j) {
    double norm = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      const double v = train_features.at(j, k);
      weight[k * n + j] = -2.0 * v;
      norm += v * v;
    }
    bias[j] = norm;
  }
  head.params.set_requires_grad(false);
  return head;
}

Tensor batch_directed_rows(const DistanceHead& head, const Tensor& batch_features,
                           std::span<const std::size_t> batch_ids, std::size_t s,
                           const GraphOptions& options) {
  const std::size_t b = batch_ids.size();
  if (b < 2) throw ParameterError("a batch graph needs at least 2 nodes, got " + std::to_string(b));
  if (batch_features.rank() != 2 || batch_features.dim(0) != b) {
    throw ShapeError("batch features " + shape_str(batch_features.shape()) + " do not match " +
                     std::to_string(b) + " ids");
  }
  if (s == 0 || s > b - 1) {
    throw ParameterError("sparsity s=" + std::to_string(s) + " must lie in [1, " +
                         std::to_string(b - 1) + "] for a batch of " + std::to_string(b));
  }
  Tensor distances = distance_head_forward(head, batch_features);
  auto columns = head.columns_of(batch_ids);
  std::vector<std::optional<std::size_t>> self(b);
  if (!options.full_columns) {
    for (std::size_t r = 0; r < b; ++r) self[r] = r;
    return sparse_affinity(gather_columns(distances, columns), s, batch_ids, self);
  }
  for (std::size_t r = 0; r < b; ++r) self[r] = columns[r];
  Tensor full = sparse_affinity(distances, s, head.train_ids(), self);
  return gather_columns(full, columns);
}

GraphBatch build_batch_graph(const DistanceHead& head, const Tensor& batch_features,
                             std::span<const std::size_t> batch_ids, std::size_t s,
                             const GraphOptions& options) {
  Tensor directed = batch_directed_rows(head, batch_features, batch_ids, s, options);
  return GraphBatch{batch_features, propagation_from_directed(directed),
                    std::vector<std::size_t>(batch_ids.begin(), batch_ids.end())};
}

namespace {

std::vector<double> pairwise_affinity(const Tensor& features, BaselineKind kind) {
  if (features.rank() != 2) throw ShapeError("baseline graph expects [b x d] features");
  const std::size_t b = features.dim(0), d = features.dim(1);
  auto x = features.data();
  std::vector<double> a(b * b, 0.0);
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t j = i + 1; j < b; ++j) {
      double v = 0.0;
      if (kind == BaselineKind::inner_product) {
        for (std::size_t k = 0; k < d; ++k) v += x[i * d + k] * x[j * d + k];
      } else {
        double sq = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
          const double diff = x[i * d + k] - x[j * d + k];
          sq += diff * diff;
        }
        v = std::exp(-std::sqrt(sq));
      }
      a[i * b + j] = v;
      a[j * b + i] = v;
    }
  return a;
}

}  // namespace

GraphBatch baseline_graph(const Tensor& features, BaselineKind kind, double threshold,
                          std::vector<std::size_t> node_ids) {
  if (features.rank() != 2 || features.dim(0) < 2) {
    throw ShapeError("baseline graph needs at least 2 feature rows, got " +
                     shape_str(features.shape()));
  }
  if (!(threshold >= 0.0)) throw ParameterError("baseline threshold must be nonnegative");
  const std::size_t b = features.dim(0);
  auto a = pairwise_affinity(features, kind);
  for (auto& v : a)
    if (!(v > threshold)) v = 0.0;
  if (node_ids.empty()) {
    node_ids.resize(b);
    std::iota(node_ids.begin(), node_ids.end(), std::size_t{0});
  }
  NoGradGuard no_grad;
  Tensor adjacency({b, b}, std::move(a));
  return GraphBatch{features.detach(), propagation_from_directed(adjacency), std::move(node_ids)};
}

double calibrate_threshold(const Tensor& features, BaselineKind kind, double keep_fraction) {
  if (!(keep_fraction > 0.0 && keep_fraction <= 1.0)) {
    throw ParameterError("keep fraction must lie in (0, 1]");
  }
  const std::size_t b = features.dim(0);
  auto a = pairwise_affinity(features, kind);
  std::vector<double> pairs;
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t j = i + 1; j < b; ++j) pairs.push_back(a[i * b + j]);
  auto keep = static_cast<std::size_t>(std::llround(keep_fraction * static_cast<double>(pairs.size())));
  keep = std::clamp<std::size_t>(keep, 1, pairs.size());
  std::nth_element(pairs.begin(), pairs.begin() + static_cast<std::ptrdiff_t>(keep - 1), pairs.end(),
                   std::greater<>());
  // Entries strictly above the threshold survive.
  double kth = pairs[keep - 1];
  double below = 0.0;
  for (double v : pairs)
    if (v < kth) below = std::max(below, v);
  return std::max(0.0, below);
}

}  // namespace c2g
