#pragma once

// Pipeline stages behind the `c2g` subcommands. Each returns a process exit
// code: 0 on success, 1 on configuration errors, 2 when a prerequisite
// checkpoint is missing.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>

#include "c2g/config.hpp"
#include "c2g/data.hpp"
#include "c2g/networks.hpp"

namespace c2g {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitMissingCheckpoint = 2;

struct CommandFlags {
  std::optional<Mechanism> mechanism;
  std::optional<std::filesystem::path> out_dir;
  std::optional<std::uint64_t> seed;
};

void apply_flags(RunConfig& cfg, const CommandFlags& flags);

// Dataset and deterministic train/test split named by a config.
struct Workspace {
  Dataset data;
  Split split;
};

Workspace load_workspace(const RunConfig& cfg);
CnnTeacher make_teacher(const RunConfig& cfg, const Dataset& data);
GnnStudent make_student(const RunConfig& cfg, const Dataset& data);
DistanceHead make_head(const RunConfig& cfg, const Dataset& data, const Split& split);

int cmd_train_teacher(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_distill(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_eval(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_graph(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_sweep(const RunConfig& cfg, std::ostream& out, std::ostream& err);

}  // namespace c2g
