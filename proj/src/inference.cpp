#include "c2g/inference.hpp"

#include <algorithm>
#include <chrono>
#include <limits>
#include <ostream>
#include <random>

#include "c2g/ops.hpp"

namespace c2g {

namespace {

constexpr double kUnavailable = std::numeric_limits<double>::infinity();

int argmax_row(const Tensor& logits, std::size_t row) {
  const std::size_t c = logits.dim(1);
  std::size_t best = 0;
  for (std::size_t j = 1; j < c; ++j)
    if (logits.at(row, j) > logits.at(row, best)) best = j;
  return static_cast<int>(best);
}

Tensor stack_rows(const Tensor& top, const Tensor& bottom) {
  if (top.dim(1) != bottom.dim(1)) {
    throw ShapeError("cannot stack " + shape_str(top.shape()) + " over " + shape_str(bottom.shape()));
  }
  std::vector<double> values(top.values());
  values.insert(values.end(), bottom.data().begin(), bottom.data().end());
  return Tensor({top.dim(0) + bottom.dim(0), top.dim(1)}, std::move(values));
}

}  // namespace

std::vector<std::size_t> choose_reference_batch(std::span<const std::size_t> train_ids,
                                                std::size_t size, std::uint64_t seed) {
  std::vector<std::size_t> pool(train_ids.begin(), train_ids.end());
  std::mt19937_64 rng(mix_seed(seed, 3));
  std::shuffle(pool.begin(), pool.end(), rng);
  pool.resize(std::min(size, pool.size()));
  std::sort(pool.begin(), pool.end());
  return pool;
}

Tensor cascade_directed_rows(const DistanceHead& head, const Tensor& test_sample,
                             const Tensor& reference_features,
                             std::span<const std::size_t> reference_ids, std::size_t s) {
  const std::size_t b = reference_ids.size();
  if (test_sample.rank() != 2 || test_sample.dim(0) != 1) {
    throw ShapeError("one-by-one inference takes a single [1 x d] sample, got " +
                     shape_str(test_sample.shape()));
  }
  if (s == 0 || b < s + 1) {
    throw ParameterError("reference batch of " + std::to_string(b) + " is too small for s=" +
                         std::to_string(s));
  }
  auto columns = head.columns_of(reference_ids);
  Tensor to_reference = gather_columns(distance_head_forward(head, test_sample), columns);
  Tensor among_reference = gather_columns(distance_head_forward(head, reference_features), columns);

  const std::size_t n = b + 1;
  std::vector<double> distances(n * n, kUnavailable);
  for (std::size_t j = 0; j < b; ++j) distances[1 + j] = to_reference.data()[j];
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t j = 0; j < b; ++j) distances[(1 + i) * n + 1 + j] = among_reference.at(i, j);

  std::vector<std::size_t> ids{std::numeric_limits<std::size_t>::max()};
  ids.insert(ids.end(), reference_ids.begin(), reference_ids.end());
  std::vector<std::optional<std::size_t>> self(n);
  for (std::size_t r = 0; r < n; ++r) self[r] = r;
  return sparse_affinity(Tensor({n, n}, std::move(distances)), s, ids, self);
}

Tensor infer_one_by_one(const GnnStudent& student, const DistanceHead& head,
                        const Tensor& test_sample, const Tensor& reference_features,
                        std::span<const std::size_t> reference_ids, std::size_t s) {
  NoGradGuard no_grad;
  Tensor directed = cascade_directed_rows(head, test_sample, reference_features, reference_ids, s);
  Tensor logits = student_forward(student, propagation_from_directed(directed),
                                  stack_rows(test_sample, reference_features));
  const std::size_t c = logits.dim(1);
  return Tensor({1, c}, std::vector<double>(logits.data().begin(), logits.data().begin() + static_cast<std::ptrdiff_t>(c)));
}

SurrogateGraph surrogate_graph(const DistanceHead& head, const Tensor& test_batch,
                               const Tensor& reference_features,
                               std::span<const std::size_t> reference_ids, std::size_t s) {
  NoGradGuard no_grad;
  const std::size_t bt = test_batch.dim(0), br = reference_ids.size();
  if (s == 0) throw ParameterError("sparsity s must be at least 1");
  if (reference_features.dim(0) != br) throw ShapeError("reference features do not match reference ids");
  auto columns = head.columns_of(reference_ids);

  SurrogateGraph out;
  Tensor to_reference = gather_columns(distance_head_forward(head, test_batch), columns);
  std::vector<std::optional<std::size_t>> no_self(bt);
  out.test_to_train = sparse_affinity(to_reference, std::min(s, br), reference_ids, no_self);

  std::vector<std::size_t> picked(bt);
  out.surrogates.resize(bt);
  for (std::size_t i = 0; i < bt; ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < br; ++j) {
      const double p = out.test_to_train.at(i, j), q = out.test_to_train.at(i, best);
      if (p > q || (p == q && reference_ids[j] < reference_ids[best])) best = j;
    }
    picked[i] = best;
    out.surrogates[i] = reference_ids[best];
  }

  if (bt == 1) {
    out.directed = Tensor::zeros({1, 1});
    out.propagation = Tensor({1, 1}, {1.0});
    return out;
  }
  // d_apr(i, j) = head(x_sim(i))[sim(j)]
  Tensor surrogate_rows = gather_rows(reference_features, picked);
  std::vector<std::size_t> surrogate_columns(bt);
  for (std::size_t j = 0; j < bt; ++j) surrogate_columns[j] = columns[picked[j]];
  Tensor approx = gather_columns(distance_head_forward(head, surrogate_rows), surrogate_columns);
  std::vector<std::size_t> positions(bt);
  std::vector<std::optional<std::size_t>> self(bt);
  for (std::size_t i = 0; i < bt; ++i) {
    positions[i] = i;
    self[i] = i;
  }
  out.directed = sparse_affinity(approx, std::min(s, bt - 1), positions, self);
  out.propagation = propagation_from_directed(out.directed);
  return out;
}

Tensor infer_batch(const GnnStudent& student, const DistanceHead& head, const Tensor& test_batch,
                   const Tensor& reference_features, std::span<const std::size_t> reference_ids,
                   std::size_t s) {
  NoGradGuard no_grad;
  auto graph = surrogate_graph(head, test_batch, reference_features, reference_ids, s);
  return student_forward(student, graph.propagation, test_batch);
}

Predictions predict(const GnnStudent& student, const DistanceHead& head, const Tensor& test_features,
                    const Tensor& reference_features, std::span<const std::size_t> reference_ids,
                    const DistillConfig& cfg, Mechanism mechanism) {
  const std::size_t n = test_features.dim(0);
  if (n == 0) throw InputError("test set is empty");
  Predictions out;
  out.classes.reserve(n);
  const auto start = std::chrono::steady_clock::now();
  if (mechanism == Mechanism::one_by_one) {
    const std::size_t s = std::min(cfg.s, reference_ids.size() - 1);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t row[] = {i};
      Tensor logits = infer_one_by_one(student, head, gather_rows(test_features, row),
                                       reference_features, reference_ids, s);
      out.classes.push_back(argmax_row(logits, 0));
    }
  } else {
    for (std::size_t start_row = 0; start_row < n; start_row += cfg.batch_size) {
      const std::size_t end = std::min(n, start_row + cfg.batch_size);
      std::vector<std::size_t> rows(end - start_row);
      for (std::size_t k = 0; k < rows.size(); ++k) rows[k] = start_row + k;
      Tensor logits = infer_batch(student, head, gather_rows(test_features, rows), reference_features,
                                  reference_ids, cfg.s);
      for (std::size_t k = 0; k < rows.size(); ++k) out.classes.push_back(argmax_row(logits, k));
    }
  }
  out.wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return out;
}

InferenceReport evaluate(const GnnStudent& student, const DistanceHead& head, const Dataset& data,
                         std::span<const std::size_t> test_ids,
                         std::span<const std::size_t> reference_ids, const DistillConfig& cfg,
                         Mechanism mechanism) {
  if (test_ids.empty()) throw InputError("test set is empty");
  NoGradGuard no_grad;
  Tensor test_features = data.rows(test_ids);
  Tensor reference_features = data.rows(reference_ids);
  auto predicted = predict(student, head, test_features, reference_features, reference_ids, cfg, mechanism);

  InferenceReport report;
  report.mechanism = mechanism;
  report.test_ids.assign(test_ids.begin(), test_ids.end());
  report.predictions = std::move(predicted.classes);
  report.wall_ms = predicted.wall_ms;
  report.labels = data.labels_of(test_ids);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < report.labels.size(); ++i)
    if (report.predictions[i] == report.labels[i]) ++correct;
  report.accuracy = static_cast<double>(correct) / static_cast<double>(report.labels.size());
  return report;
}

double agreement(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size() || a.empty()) throw ShapeError("agreement needs equal, nonempty lists");
  std::size_t same = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] == b[i]) ++same;
  return static_cast<double>(same) / static_cast<double>(a.size());
}

void InferenceReport::write_csv(std::ostream& os, bool header) const {
  if (header) os << "mechanism,n_test,accuracy,wall_ms\n";
  const auto old = os.precision(17);
  os << mechanism_name(mechanism) << ',' << predictions.size() << ',' << accuracy << ',' << wall_ms << '\n';
  os.precision(old);
}

void InferenceReport::write_predictions(std::ostream& os) const {
  os << "test_id,pred,label\n";
  for (std::size_t i = 0; i < predictions.size(); ++i)
    os << test_ids[i] << ',' << predictions[i] << ',' << labels[i] << '\n';
}

double evaluate_baseline(const GnnStudent& student, const Dataset& data,
                         std::span<const std::size_t> test_ids, const DistillConfig& cfg,
                         BaselineKind kind, double threshold) {
  if (test_ids.empty()) throw InputError("test set is empty");
  NoGradGuard no_grad;
  std::size_t correct = 0;
  for (std::size_t start = 0; start < test_ids.size(); start += cfg.batch_size) {
    const std::size_t end = std::min(test_ids.size(), start + cfg.batch_size);
    auto ids = test_ids.subspan(start, end - start);
    Tensor features = data.rows(ids);
    Tensor propagation = ids.size() >= 2
                             ? baseline_graph(features, kind, threshold).propagation
                             : Tensor({1, 1}, {1.0});
    Tensor logits = student_forward(student, propagation, features);
    auto labels = data.labels_of(ids);
    for (std::size_t i = 0; i < ids.size(); ++i)
      if (argmax_row(logits, i) == labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(test_ids.size());
}

}  // namespace c2g
