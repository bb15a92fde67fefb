#include "c2g/distill.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <ostream>

#include "c2g/ops.hpp"

namespace c2g {

const char* mechanism_name(Mechanism m) { return m == Mechanism::batch ? "batch" : "one"; }

void DistillConfig::validate() const {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw ConfigError("tau must be positive");
  if (!(kd_alpha >= 0.0)) throw ConfigError("kd_alpha must be nonnegative");
  if (!(lr > 0.0)) throw ConfigError("lr must be positive");
  if (batch_size < 2) throw ConfigError("batch_size must be at least 2 (a graph needs two nodes)");
  if (s < 1 || s > batch_size - 1) {
    throw ConfigError("s must lie in [1, batch_size - 1] = [1, " + std::to_string(batch_size - 1) + "]");
  }
  if (epochs == 0) throw ConfigError("epochs must be positive");
}

std::size_t DistillConfig::sparsity_for(std::size_t nodes) const {
  return std::min(s, nodes > 1 ? nodes - 1 : std::size_t{1});
}

void TrainLog::write_csv(std::ostream& os) const {
  os << "epoch,ce_loss,kd_loss,total_loss,train_acc,wall_ms\n";
  const auto old = os.precision(17);
  for (const auto& r : records) {
    os << r.epoch << ',' << r.ce_loss << ',' << r.kd_loss << ',' << r.total_loss << ','
       << r.train_acc << ',' << r.wall_ms << '\n';
  }
  os.precision(old);
}

bool same_trajectory(const TrainLog& a, const TrainLog& b) {
  if (a.records.size() != b.records.size()) return false;
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    const auto& x = a.records[i];
    const auto& y = b.records[i];
    if (x.epoch != y.epoch || x.ce_loss != y.ce_loss || x.kd_loss != y.kd_loss ||
        x.total_loss != y.total_loss || x.train_acc != y.train_acc)
      return false;
  }
  return true;
}

Tensor kd_loss(const Tensor& teacher_logits, const Tensor& student_logits, double tau) {
  if (teacher_logits.shape() != student_logits.shape() || student_logits.rank() != 2) {
    throw ShapeError("kd_loss: teacher " + shape_str(teacher_logits.shape()) + " vs student " +
                     shape_str(student_logits.shape()));
  }
  const std::size_t b = student_logits.dim(0), c = student_logits.dim(1);
  Tensor log_teacher, log_student;
  {
    NoGradGuard no_grad;
    log_teacher = log_softmax(teacher_logits, tau);
    log_student = log_softmax(student_logits, tau);
  }
  auto lt = log_teacher.data();
  auto ls = log_student.data();
  double total = 0.0;
  std::vector<double> diff(b * c);
  for (std::size_t i = 0; i < b * c; ++i) {
    const double qt = std::exp(lt[i]);
    diff[i] = std::exp(ls[i]) - qt;
    total += qt * (lt[i] - ls[i]);
  }
  const double inv = 1.0 / static_cast<double>(b);
  return detail::make_result("kd_loss", {1}, {total * inv}, {student_logits},
                             [student_logits, diff = std::move(diff), inv, tau](std::span<const double> g) {
                               auto gs = student_logits.impl()->grad_buffer();
                               for (std::size_t i = 0; i < diff.size(); ++i)
                                 gs[i] += g[0] * inv * diff[i] / tau;
                             });
}

ObjectiveTerms student_objective_terms(const GnnStudent& student, const GraphBatch& batch,
                                       std::span<const int> labels, const Tensor& teacher_logits,
                                       const DistillConfig& cfg) {
  ObjectiveTerms terms;
  terms.student_logits = student_forward(student, batch);
  if (labels.size() != terms.student_logits.dim(0)) {
    throw ShapeError("objective: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(terms.student_logits.dim(0)) + " nodes");
  }
  Tensor ce = cross_entropy(terms.student_logits, labels);
  Tensor kd = kd_loss(teacher_logits, terms.student_logits, cfg.tau);
  terms.ce = ce.item();
  terms.kd = kd.item();
  terms.total = cfg.kd_alpha == 0.0 ? ce : add(ce, scale(kd, cfg.kd_alpha));
  return terms;
}

Tensor student_objective(const GnnStudent& student, const GraphBatch& batch,
                         std::span<const int> labels, const Tensor& teacher_logits,
                         const DistillConfig& cfg) {
  return student_objective_terms(student, batch, labels, teacher_logits, cfg).total;
}

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

std::size_t count_correct(const Tensor& logits, std::span<const int> labels) {
  const std::size_t c = logits.dim(1);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < c; ++j)
      if (logits.at(i, j) > logits.at(i, best)) best = j;
    if (static_cast<int>(best) == labels[i]) ++correct;
  }
  return correct;
}

void require_training_data(const Dataset& data, std::span<const std::size_t> train_ids) {
  if (train_ids.empty() || data.size() == 0) throw InputError("training set is empty");
}

using GraphMaker =
    std::function<GraphBatch(const Tensor& features, std::span<const std::size_t> ids, std::size_t s)>;

TrainLog train_student_loop(const CnnTeacher& teacher, GnnStudent& student, ModelParams* head_params,
                            const Dataset& data, std::span<const std::size_t> train_ids,
                            const DistillConfig& cfg, const GraphMaker& make_graph) {
  cfg.validate();
  require_training_data(data, train_ids);
  for (const auto& [name, value] : teacher.params) {
    if (value.requires_grad()) throw StateError("teacher must be frozen before distillation (" + name + ")");
  }
  const bool train_head = head_params && head_params->size() > 0 &&
                          head_params->begin()->second.requires_grad();
  TrainLog log;
  const auto batch_seed = mix_seed(cfg.seed, 2);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto start = Clock::now();
    double ce = 0.0, kd = 0.0, total = 0.0;
    std::size_t seen = 0, correct = 0;
    for (const auto& batch : batches(train_ids, cfg.batch_size, batch_seed, epoch)) {
      Tensor features = data.rows(batch);
      auto labels = data.labels_of(batch);
      Tensor teacher_logits;
      {
        NoGradGuard no_grad;
        teacher_logits = teacher_forward(teacher, features);
      }
      GraphBatch graph = make_graph(features, batch, cfg.sparsity_for(batch.size()));
      auto terms = student_objective_terms(student, graph, labels, teacher_logits, cfg);
      terms.total.backward();
      sgd_step(student.params, cfg.lr);
      if (train_head) sgd_step(*head_params, cfg.lr);

      const auto weight = static_cast<double>(batch.size());
      ce += terms.ce * weight;
      kd += terms.kd * weight;
      total += terms.total.item() * weight;
      seen += batch.size();
      correct += count_correct(terms.student_logits, labels);
    }
    const auto n = static_cast<double>(seen);
    log.records.push_back({epoch + 1, ce / n, kd / n, total / n, static_cast<double>(correct) / n,
                           elapsed_ms(start)});
  }
  return log;
}

}  // namespace

TrainLog pretrain_teacher(CnnTeacher& teacher, const Dataset& data,
                          std::span<const std::size_t> train_ids, const DistillConfig& cfg) {
  cfg.validate();
  require_training_data(data, train_ids);
  teacher.params.set_requires_grad(true);
  TrainLog log;
  const auto batch_seed = mix_seed(cfg.seed, 1);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto start = Clock::now();
    double ce = 0.0;
    std::size_t seen = 0, correct = 0;
    for (const auto& batch : batches(train_ids, cfg.batch_size, batch_seed, epoch)) {
      auto labels = data.labels_of(batch);
      Tensor logits = teacher_forward(teacher, data.rows(batch));
      Tensor loss = cross_entropy(logits, labels);
      loss.backward();
      sgd_step(teacher.params, cfg.lr);
      ce += loss.item() * static_cast<double>(batch.size());
      seen += batch.size();
      correct += count_correct(logits, labels);
    }
    const auto n = static_cast<double>(seen);
    log.records.push_back({epoch + 1, ce / n, 0.0, ce / n, static_cast<double>(correct) / n,
                           elapsed_ms(start)});
  }
  teacher.params.clear_grad();
  teacher.params.set_requires_grad(false);
  return log;
}

TrainLog distill_train(const CnnTeacher& teacher, GnnStudent& student, DistanceHead& head,
                       const Dataset& data, std::span<const std::size_t> train_ids,
                       const DistillConfig& cfg) {
  GraphOptions options{cfg.full_columns};
  return train_student_loop(
      teacher, student, &head.params, data, train_ids, cfg,
      [&](const Tensor& features, std::span<const std::size_t> ids, std::size_t s) {
        return build_batch_graph(head, features, ids, s, options);
      });
}

TrainLog train_baseline_student(const CnnTeacher& teacher, GnnStudent& student,
                                const Dataset& data, std::span<const std::size_t> train_ids,
                                const DistillConfig& cfg, BaselineKind kind, double threshold) {
  return train_student_loop(
      teacher, student, nullptr, data, train_ids, cfg,
      [&](const Tensor& features, std::span<const std::size_t> ids, std::size_t) {
        return baseline_graph(features, kind, threshold, {ids.begin(), ids.end()});
      });
}

}  // namespace c2g
