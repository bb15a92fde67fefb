#pragma once

// Inductive test-time prediction.
//
// One-by-one: each test sample joins a fixed training reference batch and the
// graph is built over the combined nodes.
// Batch-by-batch: every test sample is mapped to its most probable training
// neighbor (its surrogate); distances among test samples are approximated by
// head distances between surrogates, and the test batch is propagated over
// that approximate graph.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "c2g/data.hpp"
#include "c2g/distill.hpp"
#include "c2g/graph_head.hpp"
#include "c2g/networks.hpp"

namespace c2g {

// Seeded training batch of min(size, n_train) ids, sorted.
std::vector<std::size_t> choose_reference_batch(std::span<const std::size_t> train_ids,
                                                std::size_t size, std::uint64_t seed);

// Directed rows over node order [test, reference...]; training rows never
// point at the test node.
Tensor cascade_directed_rows(const DistanceHead& head, const Tensor& test_sample,
                             const Tensor& reference_features,
                             std::span<const std::size_t> reference_ids, std::size_t s);

// [1×classes] logits for one test sample.
Tensor infer_one_by_one(const GnnStudent& student, const DistanceHead& head,
                        const Tensor& test_sample, const Tensor& reference_features,
                        std::span<const std::size_t> reference_ids, std::size_t s);

struct SurrogateGraph {
  std::vector<std::size_t> surrogates;  // training id per test row
  Tensor test_to_train;                 // [b_test×b_ref] sparse conditional distribution
  Tensor directed;                      // [b_test×b_test] rows from surrogate distances
  Tensor propagation;                   // normalized approximate graph
};

SurrogateGraph surrogate_graph(const DistanceHead& head, const Tensor& test_batch,
                               const Tensor& reference_features,
                               std::span<const std::size_t> reference_ids, std::size_t s);

// [b_test×classes] logits.
Tensor infer_batch(const GnnStudent& student, const DistanceHead& head, const Tensor& test_batch,
                   const Tensor& reference_features, std::span<const std::size_t> reference_ids,
                   std::size_t s);

struct Predictions {
  std::vector<int> classes;
  double wall_ms = 0.0;
};

// Labels never enter this path.
Predictions predict(const GnnStudent& student, const DistanceHead& head, const Tensor& test_features,
                    const Tensor& reference_features, std::span<const std::size_t> reference_ids,
                    const DistillConfig& cfg, Mechanism mechanism);

struct InferenceReport {
  Mechanism mechanism = Mechanism::batch;
  std::vector<std::size_t> test_ids;
  std::vector<int> predictions;
  std::vector<int> labels;
  double accuracy = 0.0;
  double wall_ms = 0.0;
  std::optional<double> agreement;

  void write_csv(std::ostream& os, bool header = true) const;
  void write_predictions(std::ostream& os) const;
};

InferenceReport evaluate(const GnnStudent& student, const DistanceHead& head, const Dataset& data,
                         std::span<const std::size_t> test_ids,
                         std::span<const std::size_t> reference_ids, const DistillConfig& cfg,
                         Mechanism mechanism);

// Fraction of positions where two prediction lists agree.
double agreement(std::span<const int> a, std::span<const int> b);

// Accuracy of a fixed-graph student: each test batch is graphed on its own features.
double evaluate_baseline(const GnnStudent& student, const Dataset& data,
                         std::span<const std::size_t> test_ids, const DistillConfig& cfg,
                         BaselineKind kind, double threshold);

}  // namespace c2g
