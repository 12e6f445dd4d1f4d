#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ndop/fno.hpp"
#include "ndop/rng.hpp"
#include "ndop/trajectory.hpp"

namespace ndop {

using Observation = std::vector<double>;

/// theta -> G(theta) in R^d.
class ForwardMap {
 public:
  virtual ~ForwardMap() = default;
  virtual std::size_t dim() const = 0;
  virtual Observation evaluate(const ParamVector& theta) const = 0;
  virtual std::string statistic() const { return "custom"; }
};

class FunctionForwardMap final : public ForwardMap {
 public:
  using Fn = std::function<Observation(const ParamVector&)>;
  FunctionForwardMap(Fn fn, std::size_t dim, std::string name = "custom")
      : fn_(std::move(fn)), dim_(dim), name_(std::move(name)) {}
  std::size_t dim() const override { return dim_; }
  Observation evaluate(const ParamVector& theta) const override { return fn_(theta); }
  std::string statistic() const override { return name_; }

 private:
  Fn fn_;
  std::size_t dim_;
  std::string name_;
};

struct EkiConfig {
  int ensemble_size = 100;  // J
  int iterations = 20;      // N_it
  /// Sigma_eta, either d entries (diagonal) or d*d entries (row-major).
  std::vector<double> noise_cov{0.01};
  double spread = 0.1;  // std of the initial ensemble around the center
  std::uint64_t seed = 0;
  int threads = 1;

  void validate(std::size_t d) const;
};

struct EkiEnsemble {
  std::vector<ParamVector> members;
  Observation y;
  std::vector<double> noise_cov;  // d*d row-major
};

/// One Kalman step with perturbed observations y_j = y + eta_j,
/// eta_j ~ N(0, Sigma_eta), drawn in member order:
/// theta_j += C_tg (C_gg + Sigma_eta)^{-1} (y_j - g_j), covariances with
/// 1/(J-1). Throws NumericError on non-finite g or an indefinite system.
EkiEnsemble eki_update(const EkiEnsemble& ensemble, const std::vector<Observation>& g, Rng& rng);

/// |y - g|^2 weighted by Sigma_eta^{-1}.
double eki_misfit(const Observation& y, const Observation& g, const std::vector<double>& noise_cov);

struct EkiIterate {
  int iteration = 0;       // 0: initial ensemble
  ParamVector mean;        // ensemble mean after `iteration` updates
  Observation g_of_mean;   // G(mean)
  double long_error = 0;   // mean squared error of G(mean) against y
  double misfit = 0;       // Sigma_eta-weighted misfit of the ensemble-mean output g_bar
  double short_error = 0;  // from EkiRunOptions::short_error, else 0
};

struct EkiRun {
  std::vector<EkiIterate> iterates;  // iterations + 1 entries
  std::vector<ParamVector> final_members;
};

struct EkiRunOptions {
  /// Optional short-term error of a candidate mean.
  std::function<double(const ParamVector&)> short_error;
};

/// Initial ensemble theta_center + spread * N(0, I) per coordinate, then
/// `iterations` updates with fresh perturbations each time.
EkiRun run_eki(const ForwardMap& fmap, const ParamVector& center, const Observation& y, const EkiConfig& cfg,
               const EkiRunOptions& options = {});

/// Excess kurtosis of u_xx over every point and snapshot.
double uxx_kurtosis(const Trajectory& trajectory);

struct KurtosisMapSpec {
  FnoSpec spec;
  Field u0;
  double t_long = 1000.0;
  double dt_obs = 1.0;
  double dt = 0.25;
  /// |u| above this counts as a blow-up.
  double bound = 1e3;
  /// Returned on blow-up: y + 1e3 sqrt(Sigma_eta).
  double sentinel = 0.0;
};

/// theta -> kurtosis(u_xx) of the learned model run from u0 over
/// [0, t_long], sampled every dt_obs.
class KurtosisForwardMap final : public ForwardMap {
 public:
  explicit KurtosisForwardMap(KurtosisMapSpec spec);
  std::size_t dim() const override { return 1; }
  Observation evaluate(const ParamVector& theta) const override;
  std::string statistic() const override { return "kurtosis(u_xx)"; }

  /// Simulated trajectory, throwing BlowUpError instead of returning the sentinel.
  Trajectory simulate(const ParamVector& theta) const;

 private:
  KurtosisMapSpec spec_;
};

/// Sentinel observation for target y and noise variance var: y + 1e3 sqrt(var).
double blowup_sentinel(double y, double noise_var);

}  // namespace ndop
