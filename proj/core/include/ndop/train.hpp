#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ndop/fno.hpp"
#include "ndop/odeint.hpp"
#include "ndop/trajectory.hpp"

namespace ndop {

struct LossPair {
  double absolute = 0.0;  // mean squared error over points and snapshots
  double relative = 0.0;  // mean over snapshots of |u - u_pred| / |u|
};

/// Compares snapshots [first, end). Throws ShapeError on mismatched grids,
/// channel counts, lengths or time stamps.
LossPair trajectory_loss(const Trajectory& truth, const Trajectory& predicted, std::size_t first = 0);

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t t = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  AdamState() = default;
  explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
};

/// One bias-corrected Adam update of `params` in place. Throws
/// NumericError on a non-finite gradient, ShapeError on length mismatch.
void adam_step(AdamState& state, std::span<double> params, std::span<const double> grad, double lr);

/// lr0 (1 + cos(pi epoch / total)) / 2.
double cosine_lr(double lr0, int epoch, int total);

enum class LrSchedule { kCosine, kConstant };

struct SgdConfig {
  int epochs = 1000;
  int batch = 10;
  double lr0 = 1e-3;
  /// Cosine annealing to zero over `epochs`, or lr0 throughout.
  LrSchedule schedule = LrSchedule::kCosine;
  /// Sub-trajectory length in time units; 0 uses whole trajectories.
  double horizon = 0.0;
  /// Solver step for the learned model; 0 means dt_obs / 4.
  double dt_internal = 0.0;
  GradientMode gradient_mode = GradientMode::kRecomputeStages;
  /// Integration aborts when |u| exceeds this (non-finite always aborts).
  double blowup_bound = 1e6;
  std::uint64_t seed = 0;
  int threads = 1;
};

struct LossRecord {
  int epoch = 0;
  double lr = 0.0;
  double absolute = 0.0;
  double relative = 0.0;
};

struct TrainResult {
  ParamVector params;
  AdamState adam;
  std::vector<LossRecord> history;
  /// Set when an integration blew up; params are those before the failing epoch.
  std::optional<std::string> failure;
};

/// Builds the vector field for a parameter vector.
using FieldFactory = std::function<std::unique_ptr<DifferentiableField>(const ParamVector&)>;

/// Called after every completed epoch with the updated parameters.
using EpochCallback = std::function<void(const LossRecord&, const ParamVector&, const AdamState&)>;

/// Resume point for train_short_term.
struct TrainResume {
  int first_epoch = 0;
  AdamState adam;
};

/// Epoch e: batch drawn from Rng(seed).split(e), each element integrated
/// from its first snapshot, MSE over the remaining snapshots backpropagated
/// through the RK4 chain, one Adam step at the scheduled rate.
/// Batch gradients are reduced in element order.
TrainResult train_short_term(const FieldFactory& factory, ParamVector params0, const std::vector<Trajectory>& data,
                             const SgdConfig& cfg, const std::optional<TrainResume>& resume = std::nullopt,
                             const EpochCallback& on_epoch = {});

/// FNO convenience overload.
TrainResult train_short_term(const FnoParams& params0, const std::vector<Trajectory>& data, const SgdConfig& cfg);

FieldFactory fno_factory(const FnoSpec& spec);

/// Learned-model step for a trajectory: dt_internal, or a quarter of its
/// first observation gap when dt_internal is 0.
double resolve_dt(const Trajectory& traj, double dt_internal);

/// Integrates `f` from truth.states[0] at truth.times.
Trajectory predict(const VectorField& f, const Trajectory& truth, double dt_internal,
                   double bound = std::numeric_limits<double>::infinity());

/// Short-term error: every trajectory is cut into consecutive windows of
/// `horizon` time units (whole trajectory when 0), each window is predicted
/// from its first snapshot and scored on the rest; the result averages the
/// windows.
LossPair evaluate_short_term(const VectorField& f, const std::vector<Trajectory>& data, double horizon,
                             double dt_internal, int threads = 1);

}  // namespace ndop
