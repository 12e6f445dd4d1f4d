#pragma once

#include <functional>
#include <string>
#include <vector>

#include "ndop/eki.hpp"
#include "ndop/train.hpp"

namespace ndop {

struct HybridConfig {
  int total_epochs = 3000;  // N
  int eki_every = 300;      // k
  /// SGD settings for the short-term epochs; lr0 is lambda and the
  /// schedule must be constant. `epochs` is ignored in favour of total_epochs.
  SgdConfig sgd = [] {
    SgdConfig s;
    s.lr0 = 1e-4;
    s.batch = 2;
    s.schedule = LrSchedule::kConstant;
    return s;
  }();
  EkiConfig eki;
  /// Short-term error windows scored for every EKI iterate.
  int short_eval_windows = 4;
  /// Selection constraint: short error <= rho * pretrained short error.
  double rho = 2.0;

  void validate() const;
};

/// One EKI iterate as recorded in the history.
struct EkiRecord {
  int epoch = 0;      // SGD epochs completed when the EKI epoch ran
  int eki_epoch = 0;  // 1-based
  int iteration = 0;  // updates applied to the ensemble (0: initial)
  double short_error = 0.0;
  double long_error = 0.0;
  ParamVector mean;
};

struct HybridHistory {
  std::vector<LossRecord> sgd;
  std::vector<EkiRecord> eki;
  std::vector<std::string> failures;
};

struct HybridResult {
  ParamVector params;  // theta after the last epoch
  HybridHistory history;
  double pretrained_short_error = 0.0;
  double pretrained_long_error = 0.0;
};

/// Short-term error on fixed windows: the mean relative error of predicting
/// each window from its first snapshot.
class ShortTermScorer {
 public:
  ShortTermScorer(FieldFactory factory, std::vector<Trajectory> windows, double dt_internal);
  double operator()(const ParamVector& theta) const;
  const std::vector<Trajectory>& windows() const noexcept { return windows_; }

 private:
  FieldFactory factory_;
  std::vector<Trajectory> windows_;
  double dt_internal_;
};

/// `count` windows of `horizon` time units drawn from `data` with `rng`.
std::vector<Trajectory> sample_windows(const std::vector<Trajectory>& data, double horizon, int count, Rng& rng);

/// Called after each EKI epoch (1-based number) with the history so far.
using HybridCallback = std::function<void(int eki_epoch, const HybridHistory&)>;

/// For i = 1..N: one SGD epoch; after every k-th, one EKI epoch on `fmap`
/// centred at theta, after which theta is the final ensemble mean. A failed
/// EKI epoch leaves theta unchanged and is logged in history.failures.
HybridResult hybrid_train(const FieldFactory& factory, const ParamVector& pretrained,
                          const std::vector<Trajectory>& data, const ForwardMap& fmap, const Observation& y,
                          const HybridConfig& cfg, const HybridCallback& on_eki_epoch = {});

/// Index of the EKI record with the smallest long-term error among those
/// with short_error <= rho * reference_short; ties go to the earliest.
/// When no record is feasible the one with the smallest short error is
/// returned. Throws InvalidArgument on an empty history.
std::size_t select_checkpoint(const std::vector<EkiRecord>& records, double reference_short, double rho = 2.0);

}  // namespace ndop
