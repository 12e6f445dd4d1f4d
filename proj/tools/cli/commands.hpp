#pragma once

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "cli/config.hpp"
#include "ndop/trajectory.hpp"

namespace ndop::cli {

namespace fs = std::filesystem;

struct RunOptions {
  fs::path out;  // experiment directory; subcommands use out/<name>
  int threads = 1;
  std::optional<fs::path> checkpoint;  // hybrid: pretrained model; evaluate: model to score
  std::optional<fs::path> resume;      // train: resumable checkpoint
  std::string split = "test";          // evaluate / stats: "train" or "test"
  std::ostream* log = &std::clog;
};

/// out/data: train_NNN.nd, test_NNN.nd, manifest.json.
void cmd_gen_data(const ExperimentConfig& cfg, const RunOptions& opt);
/// out/train: checkpoint.nd (+ .adam), checkpoint_epoch_NNNNNN.nd, loss.csv, manifest.json.
void cmd_train(const ExperimentConfig& cfg, const RunOptions& opt);
/// out/hybrid: final.nd, selected.nd, sgd_history.csv, eki_history.csv, manifest.json.
void cmd_hybrid(const ExperimentConfig& cfg, const RunOptions& opt);
/// out/evaluate: metrics.json, spectrum.csv, pdf_*.csv, acf_*.csv, manifest.json.
void cmd_evaluate(const ExperimentConfig& cfg, const RunOptions& opt);
/// out/stats: truth statistics of one split at the evaluation resolution.
void cmd_stats(const ExperimentConfig& cfg, const RunOptions& opt);

/// Stored trajectories of a split, in file-name order.
std::vector<Trajectory> load_split(const fs::path& data_dir, const std::string& split,
                                   std::vector<fs::path>* files = nullptr);

}  // namespace ndop::cli
