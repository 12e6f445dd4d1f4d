#include "ndop/pde.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "ndop/error.hpp"
#include "ndop/odeint.hpp"
#include "ndop/parallel.hpp"

namespace ndop {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Smallest even length >= 3n/2.
int padded_length(int n) {
  const int m = (3 * n + 1) / 2;
  return m % 2 == 0 ? m : m + 1;
}

Grid padded_grid(const Grid& g) {
  if (g.dims() == 1) return g.resized({padded_length(g.n(0)), 1});
  return g.resized({padded_length(g.n(0)), padded_length(g.n(1))});
}

// Multiplies every coefficient by fn(kx, ky, nyquist), where kx, ky are
// physical wavenumbers 2 pi m / L and `nyquist` flags a Nyquist bin on
// axis 0 / axis 1.
template <typename Fn>
Spectrum apply_multiplier(const Spectrum& s, Fn&& fn) {
  Spectrum out = s;
  const Grid& g = s.grid();
  for (int c = 0; c < s.channels(); ++c) {
    auto co = out.channel(c);
    if (g.dims() == 1) {
      const int n = g.n(0);
      for (int k = 0; k < g.half_modes(); ++k) {
        co[k] *= fn(kTwoPi * k / g.extent(0), 0.0, std::array<bool, 2>{2 * k == n, false});
      }
    } else {
      const int nx = g.n(0), ny = g.n(1), half = g.half_modes();
      for (int i = 0; i < nx; ++i) {
        const int mx = signed_wavenumber(i, nx);
        const double kx = kTwoPi * mx / g.extent(0);
        for (int j = 0; j < half; ++j) {
          const double ky = kTwoPi * j / g.extent(1);
          co[static_cast<std::size_t>(i) * half + j] *= fn(kx, ky, std::array<bool, 2>{2 * i == nx, 2 * j == ny});
        }
      }
    }
  }
  return out;
}

// Spectral first derivative along `axis`, Nyquist bin zeroed.
Spectrum derivative(const Spectrum& s, int axis) {
  return apply_multiplier(s, [axis](double kx, double ky, std::array<bool, 2> nyq) {
    if (nyq[axis]) return Complex(0.0, 0.0);
    return Complex(0.0, axis == 0 ? kx : ky);
  });
}

// Coefficients of sum_p a_p * b_p on the original grid, products formed on
// the 3/2-padded grid.
Spectrum dealiased_dot(std::initializer_list<std::pair<const Spectrum*, const Spectrum*>> terms) {
  const Grid& g = terms.begin()->first->grid();
  const Grid pg = padded_grid(g);
  Field acc(pg);
  for (const auto& [a, b] : terms) {
    const Field pa = fft_inverse(spectral_resize(*a, pg));
    const Field pb = fft_inverse(spectral_resize(*b, pg));
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += pa[i] * pb[i];
  }
  return spectral_resize(fft_forward(acc), g);
}

void require_dims(const Field& u, int dims, const char* op) {
  if (u.grid().dims() != dims) {
    throw InvalidArgument(std::string(op) + ": expected a " + std::to_string(dims) + "-D field, got " +
                          std::to_string(u.grid().dims()) + "-D");
  }
  if (u.channels() != 1) throw ShapeError(std::string(op) + ": expected a single-channel field");
}

}  // namespace

// ---------------------------------------------------------------- GRF

void GrfSpec::validate() const {
  if (!(sigma2 > 0.0) || !(tau > 0.0) || !(alpha > 0.0)) {
    throw InvalidArgument("GRF: sigma2, tau and alpha must be positive");
  }
  const double d = grid.dims();
  if (!(alpha * d > d / 2.0)) throw InvalidArgument("GRF: alpha too small for summable variances");
}

double GrfSpec::mode_variance(int kx, int ky) const {
  double k2 = static_cast<double>(kx) * kx / (grid.extent(0) * grid.extent(0));
  if (grid.dims() == 2) k2 += static_cast<double>(ky) * ky / (grid.extent(1) * grid.extent(1));
  return sigma2 * std::pow(4.0 * std::numbers::pi * std::numbers::pi * k2 + tau * tau, -alpha);
}

Field sample_grf(const GrfSpec& spec, Rng& rng) {
  spec.validate();
  const Grid& g = spec.grid;
  Spectrum s(g);
  auto co = s.channel(0);
  const double n_total = static_cast<double>(g.size());
  // Amplitude c with E|c|^2 = var: complex for paired modes, real for
  // self-conjugate ones. The DFT coefficient is N c.
  auto complex_draw = [&](double var) {
    const double sd = std::sqrt(0.5 * var);
    const double re = rng.normal() * sd;
    const double im = rng.normal() * sd;
    return n_total * Complex(re, im);
  };
  auto real_draw = [&](double var) { return n_total * Complex(rng.normal() * std::sqrt(var), 0.0); };

  if (g.dims() == 1) {
    const int n = g.n(0);
    for (int k = 0; k < g.half_modes(); ++k) {
      const double var = spec.mode_variance(k);
      co[k] = (k == 0 || 2 * k == n) ? real_draw(var) : complex_draw(var);
    }
    return fft_inverse(s);
  }

  const int nx = g.n(0), ny = g.n(1), half = g.half_modes();
  auto at = [&](int i, int j) -> Complex& { return co[static_cast<std::size_t>(i) * half + j]; };
  for (int i = 0; i < nx; ++i) {
    const int kx = signed_wavenumber(i, nx);
    for (int j = 0; j < half; ++j) {
      const double var = spec.mode_variance(kx, j);
      const bool self_plane = j == 0 || 2 * j == ny;
      if (!self_plane) {
        at(i, j) = complex_draw(var);
        continue;
      }
      // On the ky = 0 and ky = ny/2 planes, (kx, ky) pairs with (-kx, ky).
      const int partner = (nx - i) % nx;
      if (partner == i) {
        at(i, j) = real_draw(var);
      } else if (i < partner) {
        at(i, j) = complex_draw(var);
        at(partner, j) = std::conj(at(i, j));
      }
    }
  }
  return fft_inverse(s);
}

// ---------------------------------------------------------------- right-hand sides

Field burgers_rhs(const Field& u, double nu) {
  require_dims(u, 1, "burgers_rhs");
  const Spectrum uh = fft_forward(u);
  const Spectrum ux = derivative(uh, 0);
  Spectrum out = dealiased_dot({{&uh, &ux}});
  auto co = out.channel(0);
  auto ui = uh.channel(0);
  const double l = u.grid().extent(0);
  for (int k = 0; k < u.grid().half_modes(); ++k) {
    const double kk = kTwoPi * k / l;
    co[k] = -co[k] - nu * kk * kk * ui[k];
  }
  return fft_inverse(out);
}

Field kse_rhs(const Field& u) {
  require_dims(u, 1, "kse_rhs");
  const Spectrum uh = fft_forward(u);
  const Spectrum ux = derivative(uh, 0);
  Spectrum out = dealiased_dot({{&uh, &ux}});
  auto co = out.channel(0);
  auto ui = uh.channel(0);
  const double l = u.grid().extent(0);
  for (int k = 0; k < u.grid().half_modes(); ++k) {
    const double k2 = (kTwoPi * k / l) * (kTwoPi * k / l);
    co[k] = -co[k] + (k2 - k2 * k2) * ui[k];
  }
  return fft_inverse(out);
}

namespace {

Spectrum streamfunction(const Spectrum& wh) {
  return apply_multiplier(wh, [](double kx, double ky, std::array<bool, 2>) {
    const double k2 = kx * kx + ky * ky;
    return k2 > 0.0 ? Complex(1.0 / k2, 0.0) : Complex(0.0, 0.0);
  });
}

}  // namespace

Field nse_vorticity_rhs(const Field& omega, double nu, const Field& forcing) {
  require_dims(omega, 2, "nse_vorticity_rhs");
  if (!(forcing.grid() == omega.grid()) || forcing.channels() != 1) {
    throw ShapeError("nse_vorticity_rhs: forcing must live on the vorticity grid");
  }
  const Spectrum wh = fft_forward(omega);
  const Spectrum psi = streamfunction(wh);
  const Spectrum vel_u = derivative(psi, 1);
  Spectrum vel_v = derivative(psi, 0);
  for (auto& c : vel_v.coefficients()) c = -c;
  const Spectrum wx = derivative(wh, 0);
  const Spectrum wy = derivative(wh, 1);
  Spectrum adv = dealiased_dot({{&vel_u, &wx}, {&vel_v, &wy}});
  const Spectrum lap = apply_multiplier(wh, [](double kx, double ky, std::array<bool, 2>) {
    return Complex(-(kx * kx + ky * ky), 0.0);
  });
  auto a = adv.coefficients();
  auto lp = lap.coefficients();
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = -a[i] + nu * lp[i];
  Field out = fft_inverse(adv);
  out += forcing;
  return out;
}

std::array<Field, 2> nse_velocity(const Field& omega) {
  require_dims(omega, 2, "nse_velocity");
  const Spectrum psi = streamfunction(fft_forward(omega));
  Spectrum v = derivative(psi, 0);
  for (auto& c : v.coefficients()) c = -c;
  return {fft_inverse(derivative(psi, 1)), fft_inverse(v)};
}

Field nse_default_forcing(const Grid& grid) {
  if (grid.dims() != 2) throw InvalidArgument("nse_default_forcing: grid must be 2-D");
  Field f(grid);
  const int nx = grid.n(0), ny = grid.n(1);
  for (int i = 0; i < nx; ++i) {
    for (int j = 0; j < ny; ++j) {
      const double s = kTwoPi * (static_cast<double>(i) / nx + static_cast<double>(j) / ny);
      f[static_cast<std::size_t>(i) * ny + j] = 0.1 * (std::sin(s) + std::cos(s));
    }
  }
  return f;
}

// ---------------------------------------------------------------- systems

std::string to_string(SystemKind kind) {
  switch (kind) {
    case SystemKind::kBurgers: return "burgers";
    case SystemKind::kKse: return "kse";
    case SystemKind::kNse: return "nse";
  }
  return "unknown";
}

SystemKind system_from_string(const std::string& name) {
  if (name == "burgers") return SystemKind::kBurgers;
  if (name == "kse") return SystemKind::kKse;
  if (name == "nse") return SystemKind::kNse;
  throw InvalidArgument("unknown system '" + name + "' (expected burgers, kse or nse)");
}

void TrueSystem::validate() const {
  if (kind != SystemKind::kKse && !(nu > 0.0)) throw InvalidArgument("Burgers/NSE need nu > 0");
}

Field TrueSystem::rhs(const Field& u) const {
  switch (kind) {
    case SystemKind::kBurgers: return burgers_rhs(u, nu);
    case SystemKind::kKse: return kse_rhs(u);
    case SystemKind::kNse:
      if (forcing) return nse_vorticity_rhs(u, nu, *forcing);
      return nse_vorticity_rhs(u, nu, Field(u.grid()));
  }
  throw InvalidArgument("unknown system kind");
}

Trajectory reference_solve(const TrueSystem& system, const Field& u0, std::vector<double> times, double dt_internal) {
  system.validate();
  const FunctionField f([&system](const Field& u, double) { return system.rhs(u); });
  return integrate(f, u0, IntegrationPlan(std::move(times), dt_internal));
}

Field kse_initial_condition(const Grid& grid) {
  if (grid.dims() != 1) throw InvalidArgument("kse_initial_condition: grid must be 1-D");
  Field u(grid);
  for (int i = 0; i < grid.n(0); ++i) {
    const double x = i * grid.spacing(0);
    u[static_cast<std::size_t>(i)] = 0.1 * std::cos(x / 16.0) * (1.0 + 2.0 * std::sin(x / 16.0));
  }
  return u;
}

Dataset generate_dataset(const DatasetSpec& spec, const Rng& rng, int threads) {
  spec.system.validate();
  if (!(spec.dt_obs > 0.0) || !(spec.t_final >= 0.0)) throw InvalidArgument("dataset: need dt_obs > 0, t_final >= 0");
  if (spec.space_stride < 1 || spec.grid.n(0) % spec.space_stride != 0) {
    throw InvalidArgument("dataset: space_stride must divide the solver grid");
  }
  const auto count = static_cast<std::size_t>(std::llround(spec.t_final / spec.dt_obs)) + 1;
  std::vector<double> times(count);
  for (std::size_t i = 0; i < count; ++i) times[i] = static_cast<double>(i) * spec.dt_obs;

  if (spec.spinup < 0.0) throw InvalidArgument("dataset: spinup must be >= 0");
  TrueSystem system = spec.system;
  if (system.kind == SystemKind::kNse && !system.forcing) system.forcing = nse_default_forcing(spec.grid);
  auto spun_up = [&](const Field& u0) {
    if (spec.spinup == 0.0) return u0;
    return reference_solve(system, u0, {0.0, spec.spinup}, spec.dt_solver).states.back();
  };

  Dataset out;
  if (spec.system.kind == SystemKind::kKse) {
    if (!(spec.train_fraction > 0.0 && spec.train_fraction <= 1.0)) {
      throw InvalidArgument("dataset: train_fraction must be in (0, 1]");
    }
    const Trajectory full =
        reference_solve(system, spun_up(kse_initial_condition(spec.grid)), times, spec.dt_solver)
            .subsampled(spec.space_stride, 1);
    const double split = spec.train_fraction * spec.t_final;
    std::size_t n_train = 0;
    while (n_train < count && times[n_train] <= split + 1e-9 * spec.dt_obs) ++n_train;
    out.train.push_back(full.slice(0, n_train));
    if (n_train < count) out.test.push_back(full.slice(n_train, count - n_train));
    return out;
  }

  if (spec.n_train < 0 || spec.n_test < 0) throw InvalidArgument("dataset: negative trajectory count");
  GrfSpec grf{spec.grf_sigma2, spec.grf_tau, spec.grf_alpha, spec.grid};
  grf.validate();
  const std::size_t total = static_cast<std::size_t>(spec.n_train + spec.n_test);
  std::vector<Trajectory> all(total);
  parallel_for(total, threads, [&](std::size_t i) {
    Rng member = rng.split(i);
    const Field u0 = sample_grf(grf, member);
    all[i] = reference_solve(system, spun_up(u0), times, spec.dt_solver).subsampled(spec.space_stride, 1);
  });
  out.train.assign(std::make_move_iterator(all.begin()), std::make_move_iterator(all.begin() + spec.n_train));
  out.test.assign(std::make_move_iterator(all.begin() + spec.n_train), std::make_move_iterator(all.end()));
  return out;
}

}  // namespace ndop
