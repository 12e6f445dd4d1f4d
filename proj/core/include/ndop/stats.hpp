#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ndop/tensor.hpp"
#include "ndop/trajectory.hpp"

namespace ndop {

/// E(k) for integer wavenumbers k (1-D) or radial shells (2-D).
struct SpectrumCurve {
  std::vector<double> k;
  std::vector<double> energy;
  double time = 0.0;
};

/// 1-D: E(k) = |u_hat_k / n|^2 / 2 for k = 0..n/2 (one entry per
/// non-negative wavenumber). 2-D: |u_hat / N|^2 / 2 summed over the full
/// spectrum into shells kappa = round(|k|), k in integer units.
SpectrumCurve energy_spectrum(const Field& field, double time = 0.0);

/// Mean of the curves (same k grid required).
SpectrumCurve mean_spectrum(std::span<const SpectrumCurve> curves);

/// Least-squares slope of log E against log k over k in [k_lo, k_hi].
double spectrum_slope(const SpectrumCurve& curve, double k_lo, double k_hi);

/// Samples of dimension `dim`, stored point-major.
struct SampleCloud {
  int dim = 1;
  std::vector<double> points;

  std::size_t size() const noexcept { return dim > 0 ? points.size() / static_cast<std::size_t>(dim) : 0; }
};

struct KlDiagnostics {
  std::size_t jittered = 0;  // distances raised to the jitter floor
};

/// Distances below this are replaced by it in the kNN estimator.
inline constexpr double kKnnJitter = 1e-12;

/// Wang-Kulkarni-Verdu kNN estimate of D(p || q):
/// (d/n) sum_i log(nu_k(i) / rho_k(i)) + log(m / (n - 1)).
/// When p and q are the same object, q-distances also exclude the point
/// itself. Throws InvalidArgument on dimension mismatch or too few samples.
double kl_divergence_knn(const SampleCloud& p, const SampleCloud& q, int k = 1, KlDiagnostics* diag = nullptr);

enum class AcfAxis { kTemporal, kSpatial };

/// Normalized autocorrelation for lags 0..max_lag. Temporal: per grid point,
/// mean-removed series, c(l) = sum_t s_t s_{t+l} / sum_t s_t^2, averaged
/// over points. Spatial: per snapshot with periodic shifts along axis 0,
/// averaged over snapshots. Throws NumericError on a zero-variance series.
std::vector<double> acf(const Trajectory& trajectory, AcfAxis axis, int max_lag);

/// First lag at which the sequence is <= 0; size() when it never is.
std::size_t first_zero_crossing(std::span<const double> acf_values);

struct Moments {
  double mean = 0.0;
  double variance = 0.0;  // population (1/n)
  double skewness = 0.0;
  double excess_kurtosis = 0.0;
};

/// Throws InvalidArgument for fewer than 4 samples, NumericError for zero
/// variance.
Moments moments(std::span<const double> samples);

struct Histogram {
  std::vector<double> lo, hi;  // range per dimension
  std::vector<int> bins;       // per dimension
  std::vector<double> density; // row-major over dimensions
};

/// Density-normalized histogram of a 1-D or 2-D cloud over the given box.
/// Samples outside the box are dropped; the density integrates to 1 over
/// the box. Throws InvalidArgument on empty input or zero in-range samples.
Histogram histogram(const SampleCloud& samples, std::span<const int> bins, std::span<const double> lo,
                    std::span<const double> hi);

/// Values of d^order u / dx^order at every point and snapshot (order 0: u).
SampleCloud derivative_samples(const Trajectory& trajectory, int order);

/// Pairs (u_x, u_xx) at every point and snapshot.
SampleCloud joint_derivative_samples(const Trajectory& trajectory);

}  // namespace ndop
