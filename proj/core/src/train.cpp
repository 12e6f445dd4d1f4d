#include "ndop/train.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "ndop/error.hpp"
#include "ndop/parallel.hpp"
#include "ndop/rng.hpp"

namespace ndop {

LossPair trajectory_loss(const Trajectory& truth, const Trajectory& predicted, std::size_t first) {
  if (truth.size() != predicted.size()) {
    throw ShapeError("trajectory_loss: " + std::to_string(truth.size()) + " vs " +
                     std::to_string(predicted.size()) + " snapshots");
  }
  if (first >= truth.size()) throw InvalidArgument("trajectory_loss: no snapshots to compare");
  double sq = 0.0, rel = 0.0;
  std::size_t points = 0;
  for (std::size_t n = first; n < truth.size(); ++n) {
    const Field& u = truth.states[n];
    const Field& p = predicted.states[n];
    if (!(u.grid() == p.grid()) || u.channels() != p.channels()) {
      throw ShapeError("trajectory_loss: snapshot shapes differ");
    }
    if (std::abs(truth.times[n] - predicted.times[n]) > 1e-9 * std::max(1.0, std::abs(truth.times[n]))) {
      throw ShapeError("trajectory_loss: snapshot times differ");
    }
    double diff = 0.0, ref = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
      const double d = p[i] - u[i];
      diff += d * d;
      ref += u[i] * u[i];
    }
    sq += diff;
    points += u.size();
    rel += std::sqrt(diff) / std::sqrt(ref);
  }
  return {sq / static_cast<double>(points), rel / static_cast<double>(truth.size() - first)};
}

void adam_step(AdamState& s, std::span<double> params, std::span<const double> grad, double lr) {
  if (params.size() != grad.size() || s.m.size() != params.size() || s.v.size() != params.size()) {
    throw ShapeError("adam_step: length mismatch between state, parameters and gradient");
  }
  for (double g : grad) {
    if (!std::isfinite(g)) throw NumericError("adam_step: non-finite gradient");
  }
  ++s.t;
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.t));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    s.m[i] = s.beta1 * s.m[i] + (1.0 - s.beta1) * grad[i];
    s.v[i] = s.beta2 * s.v[i] + (1.0 - s.beta2) * grad[i] * grad[i];
    const double mhat = s.m[i] / c1;
    const double vhat = s.v[i] / c2;
    params[i] -= lr * mhat / (std::sqrt(vhat) + s.eps);
  }
}

double cosine_lr(double lr0, int epoch, int total) {
  if (total < 1 || epoch < 0 || epoch >= total) {
    throw InvalidArgument("cosine_lr: need 0 <= epoch < total");
  }
  return lr0 * (1.0 + std::cos(std::numbers::pi * epoch / total)) / 2.0;
}

double resolve_dt(const Trajectory& traj, double dt_internal) {
  if (dt_internal > 0.0) return dt_internal;
  if (traj.size() < 2) throw InvalidArgument("cannot infer a solver step from a single snapshot");
  return (traj.times[1] - traj.times[0]) / 4.0;
}

Trajectory predict(const VectorField& f, const Trajectory& truth, double dt_internal, double bound) {
  return integrate(f, truth.states.front(), IntegrationPlan(truth.times, resolve_dt(truth, dt_internal)), bound);
}

namespace {

// Number of snapshots spanning `horizon` time units (whole trajectory when 0).
std::size_t window_length(const Trajectory& t, double horizon) {
  if (horizon <= 0.0 || t.size() < 2) return t.size();
  const double dt_obs = t.times[1] - t.times[0];
  const auto len = static_cast<std::size_t>(std::llround(horizon / dt_obs)) + 1;
  return std::min(len, t.size());
}

struct BatchItem {
  std::size_t trajectory;
  std::size_t start;
  std::size_t length;
};

std::vector<BatchItem> sample_batch(const std::vector<Trajectory>& data, const SgdConfig& cfg, Rng& rng) {
  std::vector<BatchItem> items;
  const std::size_t b = static_cast<std::size_t>(cfg.batch);
  std::vector<std::size_t> picks;
  if (data.size() == 1) {
    picks.assign(b, 0);
  } else if (b <= data.size()) {
    // Partial Fisher-Yates: distinct trajectories.
    std::vector<std::size_t> order(data.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = 0; i < b; ++i) {
      const std::size_t j = i + rng.uniform_index(order.size() - i);
      std::swap(order[i], order[j]);
      picks.push_back(order[i]);
    }
  } else {
    for (std::size_t i = 0; i < b; ++i) picks.push_back(rng.uniform_index(data.size()));
  }
  for (std::size_t k : picks) {
    const Trajectory& t = data[k];
    const std::size_t len = window_length(t, cfg.horizon);
    const std::size_t start = len < t.size() ? rng.uniform_index(t.size() - len + 1) : 0;
    items.push_back({k, start, len});
  }
  return items;
}

struct ItemResult {
  std::vector<double> grad;
  LossPair loss;
};

ItemResult run_item(const DifferentiableField& f, const Trajectory& window, const SgdConfig& cfg, double weight) {
  const IntegrationPlan plan(window.times, resolve_dt(window, cfg.dt_internal));
  const RecordedIntegration rec =
      integrate_recorded(f, window.states.front(), plan, cfg.gradient_mode, cfg.blowup_bound);
  const Trajectory& pred = rec.trajectory();
  ItemResult r;
  r.loss = trajectory_loss(window, pred, 1);
  // d(weight * MSE)/d u_pred(t_n) for n >= 1; the initial state is given.
  const double points = static_cast<double>(window.states.front().size() * (window.size() - 1));
  std::vector<Field> cot;
  cot.reserve(window.size());
  cot.emplace_back(window.grid, window.states.front().channels());
  for (std::size_t n = 1; n < window.size(); ++n) {
    Field c = pred.states[n] - window.states[n];
    c *= 2.0 * weight / points;
    cot.push_back(std::move(c));
  }
  r.grad = backpropagate(f, rec, cot).params;
  return r;
}

}  // namespace

TrainResult train_short_term(const FieldFactory& factory, ParamVector params0, const std::vector<Trajectory>& data,
                             const SgdConfig& cfg, const std::optional<TrainResume>& resume,
                             const EpochCallback& on_epoch) {
  if (cfg.epochs < 0) throw InvalidArgument("training: epochs must be >= 0");
  if (cfg.batch < 1) throw InvalidArgument("training: batch must be >= 1");
  if (!(cfg.lr0 > 0.0)) throw InvalidArgument("training: lr0 must be positive");
  TrainResult out;
  out.params = std::move(params0);
  out.adam = resume ? resume->adam : AdamState(out.params.size());
  if (out.adam.m.size() != out.params.size()) throw ShapeError("training: resumed optimizer state has wrong length");
  if (cfg.epochs == 0) return out;
  if (data.empty()) throw InvalidArgument("training: no data");
  for (const auto& t : data) {
    if (t.size() < 2) throw InvalidArgument("training: every trajectory needs at least two snapshots");
  }

  const Rng root(cfg.seed);
  const int first = resume ? resume->first_epoch : 0;
  for (int e = first; e < cfg.epochs; ++e) {
    Rng rng = root.split(static_cast<std::uint64_t>(e));
    const std::vector<BatchItem> batch = sample_batch(data, cfg, rng);
    const std::unique_ptr<DifferentiableField> field = factory(out.params);
    const double weight = 1.0 / static_cast<double>(batch.size());
    std::vector<ItemResult> results(batch.size());
    try {
      parallel_for(batch.size(), cfg.threads, [&](std::size_t i) {
        const auto& item = batch[i];
        results[i] = run_item(*field, data[item.trajectory].slice(item.start, item.length), cfg, weight);
      });
    } catch (const BlowUpError& err) {
      std::ostringstream msg;
      msg << "epoch " << e << ": " << err.what();
      out.failure = msg.str();
      return out;
    }

    std::vector<double> grad(out.params.size(), 0.0);
    LossRecord rec;
    rec.epoch = e;
    rec.lr = cfg.schedule == LrSchedule::kCosine ? cosine_lr(cfg.lr0, e, cfg.epochs) : cfg.lr0;
    for (const auto& r : results) {
      for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += r.grad[i];
      rec.absolute += weight * r.loss.absolute;
      rec.relative += weight * r.loss.relative;
    }
    adam_step(out.adam, out.params, grad, rec.lr);
    out.history.push_back(rec);
    if (on_epoch) on_epoch(rec, out.params, out.adam);
  }
  return out;
}

FieldFactory fno_factory(const FnoSpec& spec) {
  return [spec](const ParamVector& values) -> std::unique_ptr<DifferentiableField> {
    return std::make_unique<FnoField>(std::make_shared<const FnoParams>(params_unflatten(spec, values)));
  };
}

TrainResult train_short_term(const FnoParams& params0, const std::vector<Trajectory>& data, const SgdConfig& cfg) {
  return train_short_term(fno_factory(params0.spec), params0.values, data, cfg);
}

LossPair evaluate_short_term(const VectorField& f, const std::vector<Trajectory>& data, double horizon,
                             double dt_internal, int threads) {
  std::vector<Trajectory> windows;
  for (const auto& t : data) {
    const std::size_t len = window_length(t, horizon);
    if (len < 2) throw InvalidArgument("evaluate: trajectories need at least two snapshots");
    for (std::size_t s = 0; s + len <= t.size(); s += len - 1) windows.push_back(t.slice(s, len));
  }
  if (windows.empty()) throw InvalidArgument("evaluate: no data");
  std::vector<LossPair> losses(windows.size());
  parallel_for(windows.size(), threads, [&](std::size_t i) {
    losses[i] = trajectory_loss(windows[i], predict(f, windows[i], dt_internal), 1);
  });
  LossPair mean;
  for (const auto& l : losses) {
    mean.absolute += l.absolute;
    mean.relative += l.relative;
  }
  mean.absolute /= static_cast<double>(losses.size());
  mean.relative /= static_cast<double>(losses.size());
  return mean;
}

}  // namespace ndop
