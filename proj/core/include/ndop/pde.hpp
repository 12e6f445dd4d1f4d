#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "ndop/rng.hpp"
#include "ndop/tensor.hpp"
#include "ndop/trajectory.hpp"

namespace ndop {

/// Gaussian random field N(0, sigma2 (-Laplacian + tau^2)^(-alpha)) on a
/// periodic grid.
struct GrfSpec {
  double sigma2 = 625.0;
  double tau = 5.0;
  double alpha = 2.0;
  Grid grid;

  /// Throws InvalidArgument unless sigma2, tau, alpha > 0 and
  /// alpha * dims > dims / 2.
  void validate() const;

  /// Variance of the amplitude coefficient c_k = u_hat_k / N for the
  /// integer wavevector (kx, ky): sigma2 (4 pi^2 |k/L|^2 + tau^2)^(-alpha).
  double mode_variance(int kx, int ky = 0) const;
};

/// Independent complex Gaussian amplitudes per wavevector with conjugate
/// symmetry; the k = 0 and Nyquist coefficients are real.
Field sample_grf(const GrfSpec& spec, Rng& rng);

/// -u u_x + nu u_xx, with the product dealiased by the 3/2 rule.
Field burgers_rhs(const Field& u, double nu);

/// -u u_x - u_xx - u_xxxx, nonlinearity dealiased.
Field kse_rhs(const Field& u);

/// -(u, v) . grad(omega) + nu Lap(omega) + forcing with (u, v) = (psi_y,
/// -psi_x) and psi_hat = omega_hat / |k|^2 (zero mean).
Field nse_vorticity_rhs(const Field& omega, double nu, const Field& forcing);

/// Velocity (u, v) = (psi_y, -psi_x) recovered from the vorticity.
std::array<Field, 2> nse_velocity(const Field& omega);

/// 0.1 (sin(2 pi (x + y)) + cos(2 pi (x + y))) on the unit square scaled to
/// the grid extents.
Field nse_default_forcing(const Grid& grid);

enum class SystemKind { kBurgers, kKse, kNse };

std::string to_string(SystemKind kind);
/// "burgers", "kse" or "nse". Throws InvalidArgument.
SystemKind system_from_string(const std::string& name);

struct TrueSystem {
  SystemKind kind = SystemKind::kBurgers;
  double nu = 1e-3;
  std::optional<Field> forcing;  // NSE; zero forcing when absent

  void validate() const;
  Field rhs(const Field& u) const;
};

/// RK4 at dt_internal, states recorded at `times`. Throws BlowUpError with
/// the failing time on a non-finite state.
Trajectory reference_solve(const TrueSystem& system, const Field& u0, std::vector<double> times, double dt_internal);

/// Truth-data generation settings.
struct DatasetSpec {
  TrueSystem system;
  Grid grid;  // solver grid
  double grf_sigma2 = 625.0;
  double grf_tau = 5.0;
  double grf_alpha = 2.0;
  double dt_solver = 1e-4;
  double dt_obs = 0.05;
  double t_final = 5.0;
  int n_train = 1;
  int n_test = 0;
  int space_stride = 1;
  /// Time integrated (and discarded) before the first recorded state; the
  /// recorded times still start at 0.
  double spinup = 0.0;
  /// KSE only: one trajectory split in time; this fraction of the span goes
  /// to training, the rest to testing.
  double train_fraction = 0.8;
};

struct Dataset {
  std::vector<Trajectory> train;
  std::vector<Trajectory> test;
};

/// Burgers/NSE: n_train + n_test GRF initial conditions, member i drawn from
/// rng.split(i). KSE: one trajectory from 0.1 cos(x/16)(1 + 2 sin(x/16)),
/// split in time. States are recorded every dt_obs and strided in space.
Dataset generate_dataset(const DatasetSpec& spec, const Rng& rng, int threads = 1);

/// The deterministic KSE initial condition on a 1-D grid.
Field kse_initial_condition(const Grid& grid);

}  // namespace ndop
