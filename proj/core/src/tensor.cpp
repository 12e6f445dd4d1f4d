#include "ndop/tensor.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <string>
#include <tuple>

#include "ndop/error.hpp"

namespace ndop {

// ---------------------------------------------------------------- Grid

namespace {

void check_axis(int n, double extent) {
  if (n < 4 || n % 2 != 0) {
    throw InvalidArgument("grid: point count must be even and >= 4, got " + std::to_string(n));
  }
  if (!(extent > 0.0) || !std::isfinite(extent)) {
    throw InvalidArgument("grid: extent must be positive and finite");
  }
}

}  // namespace

Grid Grid::line(int n, double extent) {
  check_axis(n, extent);
  Grid g;
  g.dims_ = 1;
  g.n_ = {n, 1};
  g.extent_ = {extent, 1.0};
  return g;
}

Grid Grid::plane(int nx, int ny, double extent_x, double extent_y) {
  check_axis(nx, extent_x);
  check_axis(ny, extent_y);
  Grid g;
  g.dims_ = 2;
  g.n_ = {nx, ny};
  g.extent_ = {extent_x, extent_y};
  return g;
}

std::size_t Grid::size() const noexcept {
  return dims_ == 1 ? static_cast<std::size_t>(n_[0])
                    : static_cast<std::size_t>(n_[0]) * static_cast<std::size_t>(n_[1]);
}

std::size_t Grid::spectral_size() const noexcept {
  return dims_ == 1 ? static_cast<std::size_t>(n_[0] / 2 + 1)
                    : static_cast<std::size_t>(n_[0]) * static_cast<std::size_t>(n_[1] / 2 + 1);
}

Grid Grid::coarsened(int stride) const {
  if (stride < 1) throw InvalidArgument("grid: stride must be >= 1");
  for (int a = 0; a < dims_; ++a) {
    if (n_[a] % stride != 0) {
      throw InvalidArgument("grid: stride " + std::to_string(stride) + " does not divide " +
                            std::to_string(n_[a]));
    }
  }
  return resized({n_[0] / stride, dims_ == 2 ? n_[1] / stride : 1});
}

Grid Grid::resized(std::array<int, 2> n) const {
  return dims_ == 1 ? line(n[0], extent_[0]) : plane(n[0], n[1], extent_[0], extent_[1]);
}

bool operator==(const Grid& a, const Grid& b) noexcept {
  if (a.dims_ != b.dims_) return false;
  for (int i = 0; i < a.dims_; ++i) {
    if (a.n_[i] != b.n_[i] || a.extent_[i] != b.extent_[i]) return false;
  }
  return true;
}

// ---------------------------------------------------------------- Field

Field::Field(const Grid& grid, int channels)
    : grid_(grid), channels_(channels), values_(grid.size() * static_cast<std::size_t>(channels), 0.0) {
  if (channels < 1) throw InvalidArgument("field: channel count must be >= 1");
}

Field::Field(const Grid& grid, std::vector<double> values, int channels)
    : grid_(grid), channels_(channels), values_(std::move(values)) {
  if (channels < 1) throw InvalidArgument("field: channel count must be >= 1");
  if (values_.size() != grid.size() * static_cast<std::size_t>(channels)) {
    throw ShapeError("field: " + std::to_string(values_.size()) + " values do not match grid of " +
                     std::to_string(grid.size()) + " points x " + std::to_string(channels) +
                     " channels");
  }
}

std::span<double> Field::channel(int c) {
  return std::span<double>(values_).subspan(static_cast<std::size_t>(c) * grid_.size(), grid_.size());
}

std::span<const double> Field::channel(int c) const {
  return std::span<const double>(values_).subspan(static_cast<std::size_t>(c) * grid_.size(),
                                                  grid_.size());
}

bool Field::is_finite() const noexcept {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

double Field::max_abs() const noexcept {
  double m = 0.0;
  for (double v : values_) m = std::max(m, std::abs(v));
  return m;
}

double Field::norm() const noexcept {
  double s = 0.0;
  for (double v : values_) s += v * v;
  return std::sqrt(s);
}

namespace {

void require_same_shape(const Field& a, const Field& b, const char* op) {
  if (!(a.grid() == b.grid()) || a.channels() != b.channels()) {
    throw ShapeError(std::string("field ") + op + ": operands differ in grid or channels");
  }
}

}  // namespace

Field& Field::axpy(double a, const Field& x) {
  require_same_shape(*this, x, "axpy");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += a * x.values_[i];
  return *this;
}

Field& Field::operator+=(const Field& other) {
  require_same_shape(*this, other, "+=");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
  return *this;
}

Field& Field::operator-=(const Field& other) {
  require_same_shape(*this, other, "-=");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= other.values_[i];
  return *this;
}

Field& Field::operator*=(double s) {
  for (double& v : values_) v *= s;
  return *this;
}

Field Field::subsampled(int stride) const {
  const Grid coarse = grid_.coarsened(stride);
  Field out(coarse, channels_);
  if (grid_.dims() == 1) {
    for (int c = 0; c < channels_; ++c) {
      auto src = channel(c);
      auto dst = out.channel(c);
      for (int i = 0; i < coarse.n(0); ++i) dst[i] = src[static_cast<std::size_t>(i) * stride];
    }
  } else {
    const int ny = grid_.n(1);
    for (int c = 0; c < channels_; ++c) {
      auto src = channel(c);
      auto dst = out.channel(c);
      for (int i = 0; i < coarse.n(0); ++i) {
        for (int j = 0; j < coarse.n(1); ++j) {
          dst[static_cast<std::size_t>(i) * coarse.n(1) + j] =
              src[static_cast<std::size_t>(i * stride) * ny + static_cast<std::size_t>(j * stride)];
        }
      }
    }
  }
  return out;
}

Field Field::shifted(std::array<int, 2> shift) const {
  Field out(grid_, channels_);
  const int nx = grid_.n(0);
  const int ny = grid_.dims() == 2 ? grid_.n(1) : 1;
  auto wrap = [](int i, int n) { return ((i % n) + n) % n; };
  for (int c = 0; c < channels_; ++c) {
    auto src = channel(c);
    auto dst = out.channel(c);
    for (int i = 0; i < nx; ++i) {
      for (int j = 0; j < ny; ++j) {
        const int si = wrap(i - shift[0], nx);
        const int sj = grid_.dims() == 2 ? wrap(j - shift[1], ny) : 0;
        dst[static_cast<std::size_t>(i) * ny + j] = src[static_cast<std::size_t>(si) * ny + sj];
      }
    }
  }
  return out;
}

Field operator+(Field a, const Field& b) { return a += b; }
Field operator-(Field a, const Field& b) { return a -= b; }
Field operator*(double s, Field a) { return a *= s; }

// ---------------------------------------------------------------- Spectrum

Spectrum::Spectrum(const Grid& grid, int channels)
    : grid_(grid),
      channels_(channels),
      coefficients_(grid.spectral_size() * static_cast<std::size_t>(channels), Complex(0.0, 0.0)) {
  if (channels < 1) throw InvalidArgument("spectrum: channel count must be >= 1");
}

Spectrum::Spectrum(const Grid& grid, std::vector<Complex> coefficients, int channels)
    : grid_(grid), channels_(channels), coefficients_(std::move(coefficients)) {
  if (channels < 1) throw InvalidArgument("spectrum: channel count must be >= 1");
  if (coefficients_.size() != grid.spectral_size() * static_cast<std::size_t>(channels)) {
    throw ShapeError("spectrum: coefficient count " + std::to_string(coefficients_.size()) +
                     " does not match real-FFT layout of " + std::to_string(grid.spectral_size()) +
                     " x " + std::to_string(channels));
  }
}

std::span<Complex> Spectrum::channel(int c) {
  const std::size_t m = grid_.spectral_size();
  return std::span<Complex>(coefficients_).subspan(static_cast<std::size_t>(c) * m, m);
}

std::span<const Complex> Spectrum::channel(int c) const {
  const std::size_t m = grid_.spectral_size();
  return std::span<const Complex>(coefficients_).subspan(static_cast<std::size_t>(c) * m, m);
}

// ---------------------------------------------------------------- FFT

namespace {

// FFTW's planner is not thread-safe; execution with the new-array interface
// is. Plans are created once per shape with FFTW_ESTIMATE, which never
// times candidate algorithms, so results are bitwise reproducible.
class PlanCache {
 public:
  static PlanCache& instance() {
    static PlanCache cache;
    return cache;
  }

  fftw_plan get(const Grid& grid, bool forward) {
    const auto key = std::make_tuple(grid.dims(), grid.n(0), grid.dims() == 2 ? grid.n(1) : 1, forward);
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = plans_.find(key);
    if (it != plans_.end()) return it->second;
    std::vector<double> real(grid.size());
    std::vector<Complex> cplx(grid.spectral_size());
    auto* r = real.data();
    auto* c = reinterpret_cast<fftw_complex*>(cplx.data());
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED | (forward ? 0u : FFTW_DESTROY_INPUT);
    fftw_plan plan = nullptr;
    if (grid.dims() == 1) {
      plan = forward ? fftw_plan_dft_r2c_1d(grid.n(0), r, c, flags)
                     : fftw_plan_dft_c2r_1d(grid.n(0), c, r, flags);
    } else {
      plan = forward ? fftw_plan_dft_r2c_2d(grid.n(0), grid.n(1), r, c, flags)
                     : fftw_plan_dft_c2r_2d(grid.n(0), grid.n(1), c, r, flags);
    }
    if (plan == nullptr) throw NumericError("fftw: failed to create plan");
    plans_.emplace(key, plan);
    return plan;
  }

  PlanCache(const PlanCache&) = delete;
  PlanCache& operator=(const PlanCache&) = delete;

 private:
  PlanCache() = default;
  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

  std::mutex mutex_;
  std::map<std::tuple<int, int, int, bool>, fftw_plan> plans_;
};

}  // namespace

Spectrum fft_forward(const Field& field) {
  if (!field.is_finite()) throw NumericError("fft_forward: input contains non-finite values");
  const Grid& grid = field.grid();
  fftw_plan plan = PlanCache::instance().get(grid, true);
  Spectrum out(grid, field.channels());
  std::vector<double> in(grid.size());
  for (int c = 0; c < field.channels(); ++c) {
    auto src = field.channel(c);
    std::copy(src.begin(), src.end(), in.begin());
    fftw_execute_dft_r2c(plan, in.data(), reinterpret_cast<fftw_complex*>(out.channel(c).data()));
  }
  return out;
}

Field fft_inverse(const Spectrum& spectrum) {
  const Grid& grid = spectrum.grid();
  if (spectrum.size() != grid.spectral_size() * static_cast<std::size_t>(spectrum.channels())) {
    throw ShapeError("fft_inverse: malformed spectrum layout");
  }
  fftw_plan plan = PlanCache::instance().get(grid, false);
  Field out(grid, spectrum.channels());
  std::vector<Complex> scratch(grid.spectral_size());
  const double scale = 1.0 / static_cast<double>(grid.size());
  for (int c = 0; c < spectrum.channels(); ++c) {
    auto src = spectrum.channel(c);
    std::copy(src.begin(), src.end(), scratch.begin());
    auto dst = out.channel(c);
    fftw_execute_dft_c2r(plan, reinterpret_cast<fftw_complex*>(scratch.data()), dst.data());
    for (double& v : dst) v *= scale;
  }
  return out;
}

Field spectral_derivative(const Field& field, int order, int axis) {
  if (order < 1) throw InvalidArgument("spectral_derivative: order must be >= 1");
  const Grid& grid = field.grid();
  if (axis < 0 || axis >= grid.dims()) throw InvalidArgument("spectral_derivative: axis out of range");
  Spectrum spec = fft_forward(field);
  const int nx = grid.n(0);
  const int half = grid.half_modes();
  const double base = 2.0 * std::numbers::pi / grid.extent(axis);
  const int n_axis = grid.n(axis);
  const bool odd = order % 2 == 1;

  auto multiplier = [&](int k) {
    if (odd && 2 * std::abs(k) == n_axis) return Complex(0.0, 0.0);
    return std::pow(Complex(0.0, base * k), order);
  };

  for (int c = 0; c < spec.channels(); ++c) {
    auto coef = spec.channel(c);
    if (grid.dims() == 1) {
      for (int k = 0; k < half; ++k) coef[k] *= multiplier(k);
    } else {
      for (int i = 0; i < nx; ++i) {
        for (int j = 0; j < half; ++j) {
          const int k = axis == 0 ? signed_wavenumber(i, nx) : j;
          coef[static_cast<std::size_t>(i) * half + j] *= multiplier(k);
        }
      }
    }
  }
  return fft_inverse(spec);
}

Spectrum mode_truncate(const Spectrum& spectrum, std::array<int, 2> k_max) {
  if (k_max[0] < 0 || k_max[1] < 0) throw InvalidArgument("mode_truncate: k_max must be >= 0");
  Spectrum out = spectrum;
  const Grid& grid = spectrum.grid();
  const int half = grid.half_modes();
  for (int c = 0; c < out.channels(); ++c) {
    auto coef = out.channel(c);
    if (grid.dims() == 1) {
      for (int k = 0; k < half; ++k) {
        if (k > k_max[0]) coef[k] = 0.0;
      }
    } else {
      const int nx = grid.n(0);
      for (int i = 0; i < nx; ++i) {
        const int kx = std::abs(signed_wavenumber(i, nx));
        for (int j = 0; j < half; ++j) {
          if (kx > k_max[0] || j > k_max[1]) coef[static_cast<std::size_t>(i) * half + j] = 0.0;
        }
      }
    }
  }
  return out;
}

Spectrum mode_truncate(const Spectrum& spectrum, int k_max) {
  return mode_truncate(spectrum, std::array<int, 2>{k_max, k_max});
}

Spectrum spectral_resize(const Spectrum& spectrum, const Grid& target) {
  const Grid& src = spectrum.grid();
  if (src.dims() != target.dims()) throw ShapeError("spectral_resize: dimension mismatch");
  Spectrum out(target, spectrum.channels());
  const double scale = static_cast<double>(target.size()) / static_cast<double>(src.size());

  // A bin survives if it is strictly below both Nyquist limits; the source
  // Nyquist bin has no unique counterpart on a finer grid.
  auto keep = [](int k, int n_src, int n_dst) {
    return 2 * std::abs(k) < n_src && 2 * std::abs(k) < n_dst;
  };

  for (int c = 0; c < spectrum.channels(); ++c) {
    auto in = spectrum.channel(c);
    auto dst = out.channel(c);
    if (src.dims() == 1) {
      const int n_src = src.n(0), n_dst = target.n(0);
      for (int k = 0; k < target.half_modes(); ++k) {
        if (keep(k, n_src, n_dst)) dst[k] = in[k] * scale;
      }
    } else {
      const int sx = src.n(0), sy = src.n(1), tx = target.n(0), ty = target.n(1);
      const int shalf = src.half_modes(), thalf = target.half_modes();
      for (int i = 0; i < tx; ++i) {
        const int kx = signed_wavenumber(i, tx);
        if (!keep(kx, sx, tx)) continue;
        const int si = kx >= 0 ? kx : kx + sx;
        for (int j = 0; j < thalf; ++j) {
          if (!keep(j, sy, ty)) continue;
          dst[static_cast<std::size_t>(i) * thalf + j] = in[static_cast<std::size_t>(si) * shalf + j] * scale;
        }
      }
    }
  }
  return out;
}

}  // namespace ndop
