#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "ndop/fno.hpp"
#include "ndop/hybrid.hpp"
#include "ndop/pde.hpp"
#include "ndop/train.hpp"

namespace ndop::cli {

/// A view of the stored dataset: every `space_stride`-th grid point, every
/// `time_stride`-th snapshot, and `substeps` RK4 steps of the learned model
/// per observation gap.
struct Resolution {
  int space_stride = 1;
  int time_stride = 1;
  int substeps = 4;

  Trajectory apply(const Trajectory& t) const { return t.subsampled(space_stride, time_stride); }
  double dt_internal(double stored_dt_obs) const { return stored_dt_obs * time_stride / substeps; }
};

struct EvaluateSettings {
  double horizon = 0.0;  // error windows in time units; 0 = whole trajectories
  int knn_k = 1;
  int pdf_bins = 60;
  int acf_max_lag = 50;
};

struct HybridSettings {
  HybridConfig config;
  int substeps = 4;      // learned-model steps per observation gap
  double t_long = 0.0;   // long-statistics window; 0 = full training span
  double noise_var = 0.01;
  double bound = 1e3;
};

struct ExperimentConfig {
  DatasetSpec data;
  std::uint64_t data_seed = 0;
  Resolution train_resolution;
  Resolution eval_resolution;
  FnoSpec fno;
  std::uint64_t init_seed = 0;
  SgdConfig sgd;
  int checkpoint_every = 0;  // 0: final checkpoint only
  HybridSettings hybrid;
  EvaluateSettings evaluate;
  std::string out_dir = "out";
  /// Every setting, defaults included, as read.
  nlohmann::json materialized;
};

/// Parses a JSON config. Throws ConfigError naming the offending key for
/// missing required keys, wrong types, out-of-range values and unknown keys.
ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Replaces every seed by mix_seed(seed, section index) and updates the
/// materialized config.
void override_seeds(ExperimentConfig& cfg, std::uint64_t seed);

}  // namespace ndop::cli
