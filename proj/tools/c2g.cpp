#include <CLI11.hpp>

#include <iostream>

#include "c2g/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"CNN-to-GNN distillation pipeline"};
  app.require_subcommand(1);

  std::string config_path;
  std::string mechanism;
  std::string out_dir;
  std::uint64_t seed = 0;

  using Command = int (*)(const c2g::RunConfig&, std::ostream&, std::ostream&);
  const std::pair<const char*, Command> commands[] = {
      {"train-teacher", c2g::cmd_train_teacher}, {"distill", c2g::cmd_distill}, {"eval", c2g::cmd_eval},
      {"graph", c2g::cmd_graph},                 {"sweep", c2g::cmd_sweep},
  };
  std::vector<std::pair<CLI::App*, Command>> subs;
  for (const auto& [name, fn] : commands) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "key = value run configuration")->required();
    sub->add_option("--mechanism", mechanism, "inference mechanism")->check(CLI::IsMember({"one", "batch"}));
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--seed", seed, "run seed");
    subs.emplace_back(sub, fn);
  }
  CLI11_PARSE(app, argc, argv);

  c2g::RunConfig cfg;
  try {
    cfg = c2g::parse_config_file(config_path);
  } catch (const c2g::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return c2g::kExitConfig;
  }
  c2g::CommandFlags flags;
  for (auto* sub : app.get_subcommands()) {
    if (sub->count("--mechanism"))
      flags.mechanism = mechanism == "one" ? c2g::Mechanism::one_by_one : c2g::Mechanism::batch;
    if (sub->count("--out")) flags.out_dir = out_dir;
    if (sub->count("--seed")) flags.seed = seed;
  }
  c2g::apply_flags(cfg, flags);

  for (const auto& [sub, fn] : subs) {
    if (sub->parsed()) {
      try {
        return fn(cfg, std::cout, std::cerr);
      } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
      }
    }
  }
  return c2g::kExitConfig;
}
