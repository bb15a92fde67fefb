#pragma once

// Teacher pretraining and joint graph-head + GNN-student distillation.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "c2g/data.hpp"
#include "c2g/graph_head.hpp"
#include "c2g/networks.hpp"

namespace c2g {

enum class Mechanism { one_by_one, batch };

const char* mechanism_name(Mechanism m);

struct DistillConfig {
  std::size_t s = 50;
  double tau = 48.0;
  double kd_alpha = 1.0;
  double lr = 0.01;
  std::size_t batch_size = 100;
  std::size_t epochs = 200;
  std::uint64_t seed = 0;
  Mechanism mechanism = Mechanism::batch;
  bool full_columns = false;

  void validate() const;
  // Sparsity usable on a graph of `nodes` nodes.
  std::size_t sparsity_for(std::size_t nodes) const;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double ce_loss = 0.0;
  double kd_loss = 0.0;
  double total_loss = 0.0;
  double train_acc = 0.0;
  double wall_ms = 0.0;
};

struct TrainLog {
  std::vector<EpochRecord> records;

  void write_csv(std::ostream& os) const;
};

// Same records ignoring wall time.
bool same_trajectory(const TrainLog& a, const TrainLog& b);

// Batch mean of KL(q(teacher/tau) || q(student/tau)); the teacher is detached.
Tensor kd_loss(const Tensor& teacher_logits, const Tensor& student_logits, double tau);

struct ObjectiveTerms {
  Tensor total;
  Tensor student_logits;
  double ce = 0.0;
  double kd = 0.0;
};

ObjectiveTerms student_objective_terms(const GnnStudent& student, const GraphBatch& batch,
                                       std::span<const int> labels, const Tensor& teacher_logits,
                                       const DistillConfig& cfg);

// cross_entropy(student logits) + kd_alpha * kd_loss(teacher, student).
Tensor student_objective(const GnnStudent& student, const GraphBatch& batch,
                         std::span<const int> labels, const Tensor& teacher_logits,
                         const DistillConfig& cfg);

// Trains with cross-entropy, then freezes the teacher.
TrainLog pretrain_teacher(CnnTeacher& teacher, const Dataset& data,
                          std::span<const std::size_t> train_ids, const DistillConfig& cfg);

// Joint SGD on student and head under the distillation objective. A head whose
// parameters do not require grad is used as a fixed graph generator.
TrainLog distill_train(const CnnTeacher& teacher, GnnStudent& student, DistanceHead& head,
                       const Dataset& data, std::span<const std::size_t> train_ids,
                       const DistillConfig& cfg);

// Same objective over a fixed, non-learned affinity graph per batch.
TrainLog train_baseline_student(const CnnTeacher& teacher, GnnStudent& student,
                                const Dataset& data, std::span<const std::size_t> train_ids,
                                const DistillConfig& cfg, BaselineKind kind, double threshold);

}  // namespace c2g
