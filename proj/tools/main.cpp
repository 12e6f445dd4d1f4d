#include <CLI11.hpp>

#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include "cli/commands.hpp"
#include "cli/config.hpp"
#include "ndop/error.hpp"

int main(int argc, char** argv) {
  using namespace ndop::cli;

  CLI::App app{"ndop: learn neural dynamical operators from trajectory data"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed_override;
  int threads = 1;
  app.add_option("--config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  app.add_option("--out", out_dir, "Experiment directory (default: out_dir from the config)");
  app.add_option("--seed-override", seed_override, "Derive every seed from this value");
  app.add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);

  std::string checkpoint, resume, split = "test";
  auto* gen = app.add_subcommand("gen-data", "Generate truth trajectories");
  auto* train = app.add_subcommand("train", "Short-term trajectory training");
  train->add_option("--resume", resume, "Resume from a checkpoint written by train");
  auto* hybrid = app.add_subcommand("hybrid", "Hybrid SGD + EKI training from a pretrained model");
  hybrid->add_option("--checkpoint", checkpoint, "Pretrained checkpoint (default: <out>/train/checkpoint.nd)");
  auto* evaluate = app.add_subcommand("evaluate", "Errors and statistics of a trained model");
  evaluate->add_option("--checkpoint", checkpoint, "Model to evaluate (default: hybrid selection, else train)");
  evaluate->add_option("--split", split, "Data split")->check(CLI::IsMember({"train", "test"}));
  auto* stats = app.add_subcommand("stats", "Statistics of the truth data");
  stats->add_option("--split", split, "Data split")->check(CLI::IsMember({"train", "test"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    ExperimentConfig cfg = load_config(config_path);
    if (seed_override) override_seeds(cfg, *seed_override);
    RunOptions opt;
    opt.out = out_dir.empty() ? cfg.out_dir : out_dir;
    opt.threads = threads;
    if (!checkpoint.empty()) opt.checkpoint = checkpoint;
    if (!resume.empty()) opt.resume = resume;
    opt.split = split;

    if (*gen) cmd_gen_data(cfg, opt);
    if (*train) cmd_train(cfg, opt);
    if (*hybrid) cmd_hybrid(cfg, opt);
    if (*evaluate) cmd_evaluate(cfg, opt);
    if (*stats) cmd_stats(cfg, opt);
  } catch (const ndop::Error& e) {
    std::cerr << "error: " << e.kind() << ": " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: InternalError: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
