#include "ndop/odeint.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include "ndop/error.hpp"

namespace ndop {

// ---------------------------------------------------------------- plan

IntegrationPlan::IntegrationPlan(std::vector<double> times, double dt) : times_(std::move(times)), dt_(dt) {
  if (times_.empty()) throw InvalidArgument("integration plan: no observation times");
  if (!(dt_ > 0.0) || !std::isfinite(dt_)) throw InvalidArgument("integration plan: dt must be positive");
  steps_.reserve(times_.size() - 1);
  for (std::size_t i = 1; i < times_.size(); ++i) {
    const double gap = times_[i] - times_[i - 1];
    if (!(gap > 0.0)) throw InvalidArgument("integration plan: times must be strictly increasing");
    const double ratio = gap / dt_;
    const double steps = std::round(ratio);
    // Relative to the time scale, since gap itself carries the rounding of times_[i].
    const double scale = std::max({gap, std::abs(times_[i]), std::abs(times_[i - 1])});
    if (steps < 1.0 || std::abs(gap - steps * dt_) > 1e-12 * scale) {
      std::ostringstream msg;
      msg << "integration plan: dt=" << dt_ << " does not divide the gap " << gap << " ending at t="
          << times_[i];
      throw InvalidArgument(msg.str());
    }
    steps_.push_back(static_cast<int>(steps));
  }
}

IntegrationPlan IntegrationPlan::uniform(double t0, double dt_obs, std::size_t count, double dt) {
  std::vector<double> times(count);
  for (std::size_t i = 0; i < count; ++i) times[i] = t0 + static_cast<double>(i) * dt_obs;
  return IntegrationPlan(std::move(times), dt);
}

std::size_t IntegrationPlan::total_steps() const noexcept {
  std::size_t total = 0;
  for (int s : steps_) total += static_cast<std::size_t>(s);
  return total;
}

// ---------------------------------------------------------------- RK4

namespace {

void check_state(const Field& u, double t, double bound) {
  if (!u.is_finite()) {
    std::ostringstream msg;
    msg << "integration blew up (non-finite state) at t=" << t;
    throw BlowUpError(t, msg.str());
  }
  if (std::isfinite(bound) && u.max_abs() > bound) {
    std::ostringstream msg;
    msg << "integration blew up (|u| > " << bound << ") at t=" << t;
    throw BlowUpError(t, msg.str());
  }
}

// The single definition of the RK4 arithmetic; every mode calls it so that
// recorded, recomputed and plain steps agree bitwise. `eval(stage, state, t)`
// returns f(state, t).
template <typename Eval>
Field rk4_combine(const Field& u, double t, double dt, Eval&& eval_stage) {
  // u itself is checked before every step, so a non-finite stage state means
  // the step diverged.
  auto eval = [&](int stage, const Field& s, double ts) {
    try {
      return eval_stage(stage, s, ts);
    } catch (const NumericError& err) {
      std::ostringstream msg;
      msg << "integration blew up in the step from t=" << t << ": " << err.what();
      throw BlowUpError(t, msg.str());
    }
  };
  const double half = 0.5 * dt;
  const Field k1 = eval(0, u, t);
  Field s = u;
  s.axpy(half, k1);
  const Field k2 = eval(1, s, t + half);
  s = u;
  s.axpy(half, k2);
  const Field k3 = eval(2, s, t + half);
  s = u;
  s.axpy(dt, k3);
  const Field k4 = eval(3, s, t + dt);
  Field out = u;
  out.axpy(dt / 6.0, k1);
  out.axpy(dt / 3.0, k2);
  out.axpy(dt / 3.0, k3);
  out.axpy(dt / 6.0, k4);
  return out;
}

struct StepSchedule {
  std::vector<double> step_time;      // start time of each internal step
  std::vector<std::size_t> obs_after;  // observation index reached after step s, or npos
};

constexpr std::size_t kNoObservation = static_cast<std::size_t>(-1);

StepSchedule schedule(const IntegrationPlan& plan) {
  StepSchedule sched;
  const auto& times = plan.times();
  const auto& steps = plan.steps_per_interval();
  sched.step_time.reserve(plan.total_steps());
  sched.obs_after.reserve(plan.total_steps());
  for (std::size_t i = 0; i < steps.size(); ++i) {
    for (int j = 0; j < steps[i]; ++j) {
      sched.step_time.push_back(times[i] + static_cast<double>(j) * plan.dt());
      sched.obs_after.push_back(j + 1 == steps[i] ? i + 1 : kNoObservation);
    }
  }
  return sched;
}

}  // namespace

Field rk4_step(const VectorField& f, const Field& u, double t, double dt, double bound) {
  if (!(dt > 0.0)) throw InvalidArgument("rk4_step: dt must be positive");
  Field out = rk4_combine(u, t, dt, [&](int, const Field& s, double ts) { return f.evaluate(s, ts); });
  check_state(out, t + dt, bound);
  return out;
}

Trajectory integrate(const VectorField& f, const Field& u0, const IntegrationPlan& plan, double bound) {
  check_state(u0, plan.times().front(), bound);
  Trajectory traj;
  traj.grid = u0.grid();
  traj.times.reserve(plan.times().size());
  traj.states.reserve(plan.times().size());
  traj.times.push_back(plan.times().front());
  traj.states.push_back(u0);
  Field u = u0;
  const auto& times = plan.times();
  const auto& steps = plan.steps_per_interval();
  for (std::size_t i = 0; i < steps.size(); ++i) {
    for (int j = 0; j < steps[i]; ++j) {
      u = rk4_step(f, u, times[i] + static_cast<double>(j) * plan.dt(), plan.dt(), bound);
    }
    traj.times.push_back(times[i + 1]);
    traj.states.push_back(u);
  }
  return traj;
}

// ---------------------------------------------------------------- recording

RecordedIntegration integrate_recorded(const DifferentiableField& f, const Field& u0,
                                       const IntegrationPlan& plan, GradientMode mode, double bound) {
  check_state(u0, plan.times().front(), bound);
  RecordedIntegration rec;
  rec.plan_ = plan;
  rec.mode_ = mode;
  rec.bound_ = bound;
  rec.trajectory_.grid = u0.grid();
  rec.trajectory_.times.push_back(plan.times().front());
  rec.trajectory_.states.push_back(u0);

  const StepSchedule sched = schedule(plan);
  const std::size_t total = sched.step_time.size();
  if (mode == GradientMode::kCheckpointed) {
    rec.checkpoint_stride_ =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(total)))));
  }
  if (mode == GradientMode::kStoreStages) rec.tapes_.resize(total);

  const double dt = plan.dt();
  Field u = u0;
  for (std::size_t s = 0; s < total; ++s) {
    const double t = sched.step_time[s];
    switch (mode) {
      case GradientMode::kRecomputeStages:
        rec.states_.push_back(u);
        break;
      case GradientMode::kCheckpointed:
        if (s % rec.checkpoint_stride_ == 0) rec.states_.push_back(u);
        break;
      case GradientMode::kStoreStages:
        break;
    }
    if (mode == GradientMode::kStoreStages) {
      auto& tapes = rec.tapes_[s].stage;
      u = rk4_combine(u, t, dt, [&](int stage, const Field& x, double ts) {
        return f.evaluate_recorded(x, ts, tapes[static_cast<std::size_t>(stage)]);
      });
    } else {
      u = rk4_combine(u, t, dt, [&](int, const Field& x, double ts) { return f.evaluate(x, ts); });
    }
    check_state(u, t + dt, bound);
    if (sched.obs_after[s] != kNoObservation) {
      rec.trajectory_.times.push_back(plan.times()[sched.obs_after[s]]);
      rec.trajectory_.states.push_back(u);
    }
  }
  rec.stored_states_ = mode == GradientMode::kStoreStages ? 4 * total : rec.states_.size();
  return rec;
}

// ---------------------------------------------------------------- reverse pass

namespace {

using TapeSet = std::array<std::unique_ptr<Tape>, 4>;

// Re-evaluates one step from its start state, recording the four stages.
TapeSet record_step(const DifferentiableField& f, const Field& u, double t, double dt) {
  TapeSet tapes;
  rk4_combine(u, t, dt, [&](int stage, const Field& x, double ts) {
    return f.evaluate_recorded(x, ts, tapes[static_cast<std::size_t>(stage)]);
  });
  return tapes;
}

// Cotangent of the step input given the cotangent `g` of the step output.
Field backprop_step(const DifferentiableField& f, const TapeSet& tapes, const Field& g, double dt,
                    std::span<double> param_grad) {
  Field k1bar = (dt / 6.0) * g;
  Field k2bar = (dt / 3.0) * g;
  Field k3bar = (dt / 3.0) * g;
  const Field k4bar = (dt / 6.0) * g;
  Field ubar = g;

  const Field s4bar = f.backward(*tapes[3], k4bar, param_grad);
  ubar += s4bar;
  k3bar.axpy(dt, s4bar);

  const Field s3bar = f.backward(*tapes[2], k3bar, param_grad);
  ubar += s3bar;
  k2bar.axpy(0.5 * dt, s3bar);

  const Field s2bar = f.backward(*tapes[1], k2bar, param_grad);
  ubar += s2bar;
  k1bar.axpy(0.5 * dt, s2bar);

  ubar += f.backward(*tapes[0], k1bar, param_grad);
  return ubar;
}

}  // namespace

TrajectoryGradient backpropagate(const DifferentiableField& f, const RecordedIntegration& record,
                                 std::span<const Field> cotangents) {
  const IntegrationPlan& plan = *record.plan_;
  const Trajectory& traj = record.trajectory_;
  if (cotangents.size() != plan.times().size()) {
    throw ShapeError("backpropagate: expected " + std::to_string(plan.times().size()) +
                     " cotangents, got " + std::to_string(cotangents.size()));
  }
  for (const Field& c : cotangents) {
    if (!(c.grid() == traj.grid) || c.channels() != traj.states.front().channels()) {
      throw ShapeError("backpropagate: cotangent shape does not match the state");
    }
  }

  TrajectoryGradient grad;
  grad.params.assign(f.parameter_count(), 0.0);
  std::span<double> pg(grad.params);

  const StepSchedule sched = schedule(plan);
  const std::size_t total = sched.step_time.size();
  const double dt = plan.dt();

  Field ubar = cotangents.back();
  auto step_back = [&](std::size_t s, const TapeSet& tapes) {
    ubar = backprop_step(f, tapes, ubar, dt, pg);
    // Step s starts at an observation when the previous step ended at one.
    const bool starts_at_obs = s == 0 || sched.obs_after[s - 1] != kNoObservation;
    if (starts_at_obs) {
      const std::size_t obs = s == 0 ? 0 : sched.obs_after[s - 1];
      ubar += cotangents[obs];
    }
  };

  switch (record.mode_) {
    case GradientMode::kStoreStages:
      for (std::size_t s = total; s-- > 0;) step_back(s, record.tapes_[s].stage);
      break;
    case GradientMode::kRecomputeStages:
      for (std::size_t s = total; s-- > 0;) {
        step_back(s, record_step(f, record.states_[s], sched.step_time[s], dt));
      }
      break;
    case GradientMode::kCheckpointed: {
      const std::size_t stride = record.checkpoint_stride_;
      std::vector<Field> segment;
      for (std::size_t c = record.states_.size(); c-- > 0;) {
        const std::size_t first = c * stride;
        const std::size_t last = std::min(total, first + stride);
        segment.clear();
        segment.push_back(record.states_[c]);
        for (std::size_t s = first; s + 1 < last; ++s) {
          segment.push_back(rk4_combine(segment.back(), sched.step_time[s], dt,
                                        [&](int, const Field& x, double ts) { return f.evaluate(x, ts); }));
        }
        for (std::size_t s = last; s-- > first;) {
          step_back(s, record_step(f, segment[s - first], sched.step_time[s], dt));
        }
      }
      break;
    }
  }
  if (total == 0) ubar = cotangents.front();
  grad.initial_state = std::move(ubar);
  return grad;
}

TrajectoryGradient integrate_with_grad(const DifferentiableField& f, const Field& u0,
                                       const IntegrationPlan& plan, std::span<const Field> cotangents,
                                       GradientMode mode) {
  const RecordedIntegration rec = integrate_recorded(f, u0, plan, mode);
  return backpropagate(f, rec, cotangents);
}

}  // namespace ndop
