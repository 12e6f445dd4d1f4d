#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "ndop/tensor.hpp"
#include "ndop/trajectory.hpp"

namespace ndop {

/// Right-hand side du/dt = f(u, t) over a Field state.
class VectorField {
 public:
  virtual ~VectorField() = default;
  virtual Field evaluate(const Field& state, double t) const = 0;
};

/// Whatever a differentiable field needs to keep from one evaluation for
/// its reverse pass.
class Tape {
 public:
  virtual ~Tape() = default;
};

/// Vector field with a vector-Jacobian product. `evaluate_recorded` must
/// return bitwise the same value as `evaluate`.
class DifferentiableField : public VectorField {
 public:
  virtual std::size_t parameter_count() const = 0;

  virtual Field evaluate_recorded(const Field& state, double t, std::unique_ptr<Tape>& tape) const = 0;

  /// Reverse pass for one recorded evaluation: returns d<cot, f>/d state and
  /// adds d<cot, f>/d params into `param_grad` (length parameter_count()).
  virtual Field backward(const Tape& tape, const Field& cotangent, std::span<double> param_grad) const = 0;
};

/// Adapter for plain callables (reference solvers, tests).
class FunctionField final : public VectorField {
 public:
  using Fn = std::function<Field(const Field&, double)>;
  explicit FunctionField(Fn fn) : fn_(std::move(fn)) {}
  Field evaluate(const Field& state, double t) const override { return fn_(state, t); }

 private:
  Fn fn_;
};

/// Observation times plus a fixed internal step that divides every gap.
class IntegrationPlan {
 public:
  /// Throws InvalidArgument unless times are strictly increasing, dt > 0 and
  /// each gap is an integer number (>= 1) of steps to within 1e-12 relative.
  IntegrationPlan(std::vector<double> times, double dt);

  /// Evenly spaced observations t0, t0 + dt_obs, ..., count of them.
  static IntegrationPlan uniform(double t0, double dt_obs, std::size_t count, double dt);

  const std::vector<double>& times() const noexcept { return times_; }
  double dt() const noexcept { return dt_; }
  /// steps_per_interval()[i] internal steps separate times[i] and times[i+1].
  const std::vector<int>& steps_per_interval() const noexcept { return steps_; }
  std::size_t total_steps() const noexcept;

 private:
  std::vector<double> times_;
  double dt_;
  std::vector<int> steps_;
};

/// One classical RK4 step. Throws BlowUpError if the result is non-finite
/// or exceeds `bound` in magnitude.
Field rk4_step(const VectorField& f, const Field& u, double t, double dt,
               double bound = std::numeric_limits<double>::infinity());

/// States at every observation time; the first is u0.
Trajectory integrate(const VectorField& f, const Field& u0, const IntegrationPlan& plan,
                     double bound = std::numeric_limits<double>::infinity());

/// Storage strategy for the reverse pass through the RK4 chain.
enum class GradientMode {
  /// Keep the state at every step; re-evaluate the four stages backwards.
  kRecomputeStages,
  /// Keep every stage tape from the forward pass (fastest, most memory).
  kStoreStages,
  /// Keep every ceil(sqrt(steps))-th state; rebuild segments on the way back.
  kCheckpointed,
};

struct TrajectoryGradient {
  std::vector<double> params;
  Field initial_state;
};

/// Forward pass retained for backpropagation.
class RecordedIntegration {
 public:
  const Trajectory& trajectory() const noexcept { return trajectory_; }
  /// Number of states currently held (for the memory contract).
  std::size_t stored_states() const noexcept { return stored_states_; }

 private:
  friend RecordedIntegration integrate_recorded(const DifferentiableField&, const Field&,
                                                const IntegrationPlan&, GradientMode, double);
  friend TrajectoryGradient backpropagate(const DifferentiableField&, const RecordedIntegration&,
                                                std::span<const Field>);

  struct StepTapes {
    std::array<std::unique_ptr<Tape>, 4> stage;
  };

  std::optional<IntegrationPlan> plan_;
  GradientMode mode_ = GradientMode::kRecomputeStages;
  double bound_ = std::numeric_limits<double>::infinity();
  Trajectory trajectory_;
  std::vector<Field> states_;      // every step, or every checkpoint_stride_-th step
  std::vector<StepTapes> tapes_;   // kStoreStages only
  std::size_t checkpoint_stride_ = 1;
  std::size_t stored_states_ = 0;
};

/// Forward integration that keeps what the reverse pass needs.
RecordedIntegration integrate_recorded(const DifferentiableField& f, const Field& u0,
                                       const IntegrationPlan& plan,
                                       GradientMode mode = GradientMode::kRecomputeStages,
                                       double bound = std::numeric_limits<double>::infinity());

/// Exact gradient of sum_n <cotangents[n], u_pred(t_n)> with respect to the
/// field parameters and u0, by reverse accumulation through every RK4 stage.
/// `cotangents` holds one Field per observation time (index 0 = t0).
TrajectoryGradient backpropagate(const DifferentiableField& f, const RecordedIntegration& record,
                                 std::span<const Field> cotangents);

/// integrate_recorded followed by backpropagate.
TrajectoryGradient integrate_with_grad(const DifferentiableField& f, const Field& u0,
                                       const IntegrationPlan& plan, std::span<const Field> cotangents,
                                       GradientMode mode = GradientMode::kRecomputeStages);

}  // namespace ndop
