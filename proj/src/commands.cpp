#include "c2g/commands.hpp"

#include <fstream>
#include <ostream>

#include "c2g/checkpoint.hpp"
#include "c2g/distill.hpp"
#include "c2g/inference.hpp"

namespace c2g {

namespace fs = std::filesystem;

namespace {

constexpr const char* kTeacherFile = "teacher.c2g";
constexpr const char* kStudentFile = "student.c2g";

std::ofstream open_output(const fs::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  return os;
}

bool require_file(const fs::path& path, const char* stage, std::ostream& err) {
  if (fs::exists(path)) return true;
  err << "missing checkpoint " << path.string() << "; run `c2g " << stage << "` first\n";
  return false;
}

CnnTeacher load_teacher(const RunConfig& cfg, const Dataset& data) {
  CnnTeacher teacher = make_teacher(cfg, data);
  assign_parameters(teacher.params, load_checkpoint(cfg.out_dir / kTeacherFile));
  teacher.params.set_requires_grad(false);
  return teacher;
}

struct StudentModel {
  GnnStudent student;
  DistanceHead head;
};

StudentModel load_student(const RunConfig& cfg, const Workspace& ws) {
  StudentModel m{make_student(cfg, ws.data), make_head(cfg, ws.data, ws.split)};
  auto stored = load_checkpoint(cfg.out_dir / kStudentFile);
  assign_parameters(m.student.params, stored, "student.");
  assign_parameters(m.head.params, stored, "head.");
  m.student.params.set_requires_grad(false);
  m.head.params.set_requires_grad(false);
  return m;
}

// Runs distillation for one config; returns the trained models and log.
struct DistillResult {
  StudentModel model;
  TrainLog log;
};

DistillResult run_distill(const RunConfig& cfg, const Workspace& ws, const CnnTeacher& teacher) {
  DistillResult r{{make_student(cfg, ws.data), make_head(cfg, ws.data, ws.split)}, {}};
  r.log = distill_train(teacher, r.model.student, r.model.head, ws.data, ws.split.train_ids, cfg.distill);
  return r;
}

template <typename Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const CheckpointError& e) {
    err << "checkpoint error: " << e.what() << '\n';
    return kExitMissingCheckpoint;
  }
}

}  // namespace

void apply_flags(RunConfig& cfg, const CommandFlags& flags) {
  if (flags.mechanism) cfg.distill.mechanism = *flags.mechanism;
  if (flags.out_dir) cfg.out_dir = *flags.out_dir;
  if (flags.seed) cfg.distill.seed = *flags.seed;
}

Workspace load_workspace(const RunConfig& cfg) {
  Workspace ws;
  switch (cfg.data) {
    case DataSource::blobs:
      ws.data = make_blobs(cfg.blobs_n, cfg.blobs_classes, cfg.blobs_d, cfg.blobs_spread, cfg.data_seed);
      break;
    case DataSource::idx:
      ws.data = load_idx(cfg.images_path, cfg.labels_path);
      break;
    case DataSource::csv:
      ws.data = load_csv(cfg.csv_path, cfg.label_column);
      break;
  }
  ws.split = split(ws.data, cfg.test_fraction, cfg.data_seed);
  return ws;
}

CnnTeacher make_teacher(const RunConfig& cfg, const Dataset& data) {
  std::size_t c = 1, h = 1, w = data.feature_width();
  if (!cfg.image_shape.empty()) {
    c = cfg.image_shape[0];
    h = cfg.image_shape[1];
    w = cfg.image_shape[2];
  } else if (data.features.rank() == 4) {
    c = data.features.dim(1);
    h = data.features.dim(2);
    w = data.features.dim(3);
  }
  if (c * h * w != data.feature_width()) {
    throw ConfigError("image_shape " + std::to_string(c) + "x" + std::to_string(h) + "x" +
                      std::to_string(w) + " does not cover " + std::to_string(data.feature_width()) +
                      " features");
  }
  std::mt19937_64 rng(mix_seed(cfg.distill.seed, 10));
  return CnnTeacher(default_teacher_config(c, h, w, data.class_count, cfg.teacher_channels, cfg.teacher_fc), rng);
}

GnnStudent make_student(const RunConfig& cfg, const Dataset& data) {
  std::mt19937_64 rng(mix_seed(cfg.distill.seed, 11));
  return GnnStudent(data.feature_width(), cfg.student_hidden, data.class_count, rng);
}

DistanceHead make_head(const RunConfig& cfg, const Dataset& data, const Split& split) {
  std::mt19937_64 rng(mix_seed(cfg.distill.seed, 12));
  return DistanceHead(data.feature_width(), cfg.head_hidden, split.train_ids, rng);
}

int cmd_train_teacher(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    auto ws = load_workspace(cfg);
    CnnTeacher teacher = make_teacher(cfg, ws.data);
    DistillConfig tc = cfg.distill;
    tc.epochs = cfg.teacher_epochs;
    auto log = pretrain_teacher(teacher, ws.data, ws.split.train_ids, tc);
    fs::create_directories(cfg.out_dir);
    save_checkpoint(cfg.out_dir / kTeacherFile, teacher.params);
    auto os = open_output(cfg.out_dir / "teacher_log.csv");
    log.write_csv(os);
    out << "teacher train_acc " << log.records.back().train_acc << '\n';
    return kExitOk;
  });
}

int cmd_distill(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (!require_file(cfg.out_dir / kTeacherFile, "train-teacher", err)) return kExitMissingCheckpoint;
    auto ws = load_workspace(cfg);
    CnnTeacher teacher = load_teacher(cfg, ws.data);
    auto result = run_distill(cfg, ws, teacher);
    ModelParams stored;
    stored.merge(result.model.student.params, "student.");
    stored.merge(result.model.head.params, "head.");
    save_checkpoint(cfg.out_dir / kStudentFile, stored);
    auto os = open_output(cfg.out_dir / "train_log.csv");
    result.log.write_csv(os);
    out << "student train_acc " << result.log.records.back().train_acc << '\n';
    return kExitOk;
  });
}

int cmd_eval(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (!require_file(cfg.out_dir / kStudentFile, "distill", err)) return kExitMissingCheckpoint;
    auto ws = load_workspace(cfg);
    auto model = load_student(cfg, ws);
    auto reference = choose_reference_batch(ws.split.train_ids, cfg.distill.batch_size, cfg.distill.seed);
    auto report = evaluate(model.student, model.head, ws.data, ws.split.test_ids, reference, cfg.distill,
                           cfg.distill.mechanism);
    auto os = open_output(cfg.out_dir / "eval.csv");
    report.write_csv(os);
    auto preds = open_output(cfg.out_dir / "predictions.csv");
    report.write_predictions(preds);
    out << mechanism_name(report.mechanism) << " accuracy " << report.accuracy << '\n';
    return kExitOk;
  });
}

int cmd_graph(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (!require_file(cfg.out_dir / kStudentFile, "distill", err)) return kExitMissingCheckpoint;
    auto ws = load_workspace(cfg);
    auto model = load_student(cfg, ws);
    const auto& train = ws.split.train_ids;
    std::vector<std::size_t> ids(train.begin(),
                                 train.begin() + static_cast<std::ptrdiff_t>(std::min(train.size(), cfg.distill.batch_size)));
    if (ids.size() < 2) throw ConfigError("graph needs at least two training samples");
    NoGradGuard no_grad;
    Tensor directed = batch_directed_rows(model.head, ws.data.rows(ids), ids, cfg.distill.sparsity_for(ids.size()),
                                          GraphOptions{cfg.distill.full_columns});
    auto sparse = SparseAffinity::from_dense(directed);
    auto os = open_output(cfg.out_dir / "graph_edges.csv");
    sparse.write_csv(os, ids, ids);
    out << "graph over " << ids.size() << " training samples\n";
    return kExitOk;
  });
}

int cmd_sweep(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (!require_file(cfg.out_dir / kTeacherFile, "train-teacher", err)) return kExitMissingCheckpoint;
    auto ws = load_workspace(cfg);
    CnnTeacher teacher = load_teacher(cfg, ws.data);
    auto reference = choose_reference_batch(ws.split.train_ids, cfg.distill.batch_size, cfg.distill.seed);
    auto os = open_output(cfg.out_dir / "sweep.csv");
    os << "tau,s,accuracy\n";
    os.precision(17);
    for (double tau : cfg.tau_list) {
      for (std::size_t s : cfg.s_list) {
        RunConfig cell = cfg;
        cell.distill.tau = tau;
        cell.distill.s = std::min(s, cfg.distill.batch_size - 1);
        auto result = run_distill(cell, ws, teacher);
        auto report = evaluate(result.model.student, result.model.head, ws.data, ws.split.test_ids, reference,
                               cell.distill, cell.distill.mechanism);
        os << tau << ',' << cell.distill.s << ',' << report.accuracy << '\n';
        out << "tau " << tau << " s " << cell.distill.s << " accuracy " << report.accuracy << '\n';
      }
    }
    return kExitOk;
  });
}

}  // namespace c2g
