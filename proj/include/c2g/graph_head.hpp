#pragma once

// Differentiable s-sparse graph head.
//
// Each node ranks its candidate neighbors by a learned distance and assigns
//   p_ij = (d_(s+1) - d_ij)_+ / sum_{k<=s} (d_(s+1) - d_(k))
// so exactly the s nearest candidates receive mass. Rows are symmetrized,
// self-looped and degree-normalized into the propagation matrix of a batch.

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include "c2g/params.hpp"
#include "c2g/tensor.hpp"

namespace c2g {

struct DistanceRow {
  std::vector<double> values;
  std::vector<std::size_t> candidate_ids;
  std::optional<std::size_t> self_id;
};

// Result of ranking one row. Positions index the candidate list.
struct RowSelection {
  std::vector<std::size_t> selected;  // s nearest, ascending (distance, id)
  std::optional<std::size_t> pivot;   // the (s+1)-th nearest, when one exists
  double denominator = 0.0;           // sum over selected of (d_pivot - d_j)

  // Uniform fallback: no pivot, or every selected distance equals the pivot.
  bool degenerate() const { return !pivot || !(denominator > 0.0); }
};

// Non-finite distances and the self position are not candidates. Requires
// 1 <= s <= number of candidates.
RowSelection select_neighbors(std::span<const double> values, std::span<const std::size_t> ids,
                              std::optional<std::size_t> self_position, std::size_t s);

// Dense probabilities aligned with the candidate list.
std::vector<double> sparse_row(const DistanceRow& row, std::size_t s);

// Independent route: Euclidean projection of (uniform - d / (2 gamma)) onto the
// simplex with the gamma that steers the solution to exactly s nonzeros.
std::vector<double> oracle_sparse_row(const DistanceRow& row, std::size_t s);
// Same quadratic program for an explicit trade-off gamma > 0.
std::vector<double> regularized_row(const DistanceRow& row, double gamma);
double steering_gamma(const DistanceRow& row, std::size_t s);
std::vector<double> project_to_simplex(std::span<const double> v);

struct SparseAffinity {
  std::size_t n_rows = 0;
  std::size_t n_cols = 0;
  std::vector<std::vector<std::pair<std::size_t, double>>> rows;

  // Keeps strictly positive entries of a dense [rows x cols] matrix.
  static SparseAffinity from_dense(const Tensor& dense);
  // `row_id,col_id,weight` lines, ids mapped through the given tables.
  void write_csv(std::ostream& os, std::span<const std::size_t> row_ids,
                 std::span<const std::size_t> col_ids, bool header = true) const;
};

// Row-wise sparse_row over a distance matrix. self_columns[r] masks one column
// of row r. Differentiable in the distances with the ranking held fixed.
Tensor sparse_affinity(const Tensor& distances, std::size_t s,
                       std::span<const std::size_t> column_ids,
                       std::span<const std::optional<std::size_t>> self_columns);

// D^{-1/2} ((R + R^T)/2 + I) D^{-1/2} for directed rows R.
Tensor propagation_from_directed(const Tensor& directed);

// Distance network: ReLU MLP over input features whose decision layer has one
// neuron per training sample.
class DistanceHead {
 public:
  DistanceHead() = default;
  DistanceHead(std::size_t input_width, std::vector<std::size_t> hidden,
               std::vector<std::size_t> train_ids, std::mt19937_64& rng);

  std::size_t input_width() const { return input_width_; }
  const std::vector<std::size_t>& hidden() const { return hidden_; }
  const std::vector<std::size_t>& train_ids() const { return train_ids_; }
  std::size_t n_train() const { return train_ids_.size(); }
  std::size_t column_of(std::size_t id) const;
  std::vector<std::size_t> columns_of(std::span<const std::size_t> ids) const;

  ModelParams params;

 private:
  std::size_t input_width_ = 0;
  std::vector<std::size_t> hidden_;
  std::vector<std::size_t> train_ids_;
  std::unordered_map<std::size_t, std::size_t> column_;
};

Tensor distance_head_forward(const DistanceHead& head, const Tensor& x);

// Frozen linear head whose outputs equal squared Euclidean distances to the
// training rows up to a per-row constant, which the closed form ignores.
DistanceHead euclidean_stub_head(const Tensor& train_features, std::vector<std::size_t> train_ids);

struct GraphBatch {
  Tensor features;     // [b x d]
  Tensor propagation;  // [b x b]
  std::vector<std::size_t> node_ids;
};

struct GraphOptions {
  // Rank each row over every training column, then keep the batch columns.
  bool full_columns = false;
};

GraphBatch build_batch_graph(const DistanceHead& head, const Tensor& batch_features,
                             std::span<const std::size_t> batch_ids, std::size_t s,
                             const GraphOptions& options = {});

// Directed s-sparse rows of a batch (before symmetrization).
Tensor batch_directed_rows(const DistanceHead& head, const Tensor& batch_features,
                           std::span<const std::size_t> batch_ids, std::size_t s,
                           const GraphOptions& options = {});

enum class BaselineKind { inner_product, euclidean };

// Fixed affinity graph: v_i.v_j or exp(-||v_i - v_j||), entries at or below
// the threshold dropped, then normalized like the learned graph. Never taped.
GraphBatch baseline_graph(const Tensor& features, BaselineKind kind, double threshold,
                          std::vector<std::size_t> node_ids = {});

// Threshold under which roughly `keep_fraction` of off-diagonal pairs survive.
double calibrate_threshold(const Tensor& features, BaselineKind kind, double keep_fraction);

}  // namespace c2g
