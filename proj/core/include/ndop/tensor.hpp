#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace ndop {

using Complex = std::complex<double>;

/// Uniform periodic grid on [0, L_x) (1-D) or [0, L_x) x [0, L_y) (2-D).
/// Point i on an axis sits at x_i = i * L / n.
class Grid {
 public:
  Grid() = default;

  /// Throws InvalidArgument unless every n is >= 4 and even and every extent > 0.
  static Grid line(int n, double extent);
  static Grid plane(int nx, int ny, double extent_x, double extent_y);

  int dims() const noexcept { return dims_; }
  int n(int axis) const { return n_[axis]; }
  double extent(int axis) const { return extent_[axis]; }
  double spacing(int axis) const { return extent_[axis] / n_[axis]; }

  /// Total number of grid points.
  std::size_t size() const noexcept;

  /// Number of complex coefficients per channel in real-FFT layout:
  /// n/2+1 in 1-D, nx*(ny/2+1) in 2-D.
  std::size_t spectral_size() const noexcept;

  /// Length of the halved (last) axis in real-FFT layout.
  int half_modes() const noexcept { return n_[dims_ - 1] / 2 + 1; }

  /// Grid with every axis length divided by `stride` (same extent).
  Grid coarsened(int stride) const;

  /// Same extent, different resolution.
  Grid resized(std::array<int, 2> n) const;

  friend bool operator==(const Grid& a, const Grid& b) noexcept;

 private:
  int dims_ = 1;
  std::array<int, 2> n_{4, 1};
  std::array<double, 2> extent_{1.0, 1.0};
};

/// Real samples on a grid. Storage is row-major [channel][x][y].
class Field {
 public:
  Field() = default;
  explicit Field(const Grid& grid, int channels = 1);
  Field(const Grid& grid, std::vector<double> values, int channels = 1);

  const Grid& grid() const noexcept { return grid_; }
  int channels() const noexcept { return channels_; }
  std::size_t size() const noexcept { return values_.size(); }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }
  std::span<double> channel(int c);
  std::span<const double> channel(int c) const;

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  bool is_finite() const noexcept;
  double max_abs() const noexcept;
  /// Euclidean norm of all entries.
  double norm() const noexcept;

  /// this += a * x
  Field& axpy(double a, const Field& x);
  Field& operator+=(const Field& other);
  Field& operator-=(const Field& other);
  Field& operator*=(double s);

  /// Every `stride`-th point per axis (index striding, no filtering).
  Field subsampled(int stride) const;

  /// Periodic shift by whole cells: out(i) = in(i - shift).
  Field shifted(std::array<int, 2> shift) const;

 private:
  Grid grid_;
  int channels_ = 1;
  std::vector<double> values_;
};

Field operator+(Field a, const Field& b);
Field operator-(Field a, const Field& b);
Field operator*(double s, Field a);

/// Real-FFT coefficients, one block of `grid.spectral_size()` per channel.
/// 1-D block: k = 0..n/2. 2-D block: row-major [kx][ky] with kx = 0..nx-1
/// in FFT order (kx >= nx/2 are negative) and ky = 0..ny/2.
class Spectrum {
 public:
  Spectrum() = default;
  explicit Spectrum(const Grid& grid, int channels = 1);
  Spectrum(const Grid& grid, std::vector<Complex> coefficients, int channels = 1);

  const Grid& grid() const noexcept { return grid_; }
  int channels() const noexcept { return channels_; }
  std::size_t size() const noexcept { return coefficients_.size(); }

  std::span<Complex> coefficients() noexcept { return coefficients_; }
  std::span<const Complex> coefficients() const noexcept { return coefficients_; }
  std::span<Complex> channel(int c);
  std::span<const Complex> channel(int c) const;

  Complex& operator[](std::size_t i) { return coefficients_[i]; }
  const Complex& operator[](std::size_t i) const { return coefficients_[i]; }

 private:
  Grid grid_;
  int channels_ = 1;
  std::vector<Complex> coefficients_;
};

/// Signed integer wavenumber of FFT index i on an axis of length n.
constexpr int signed_wavenumber(int i, int n) noexcept { return i <= n / 2 ? i : i - n; }

/// Unnormalized forward real DFT: u_hat_k = sum_j u_j exp(-2 pi i k j / n).
/// Throws NumericError on non-finite input.
Spectrum fft_forward(const Field& field);

/// Inverse real DFT scaled by 1/N. Imaginary parts of self-conjugate bins
/// (k = 0 and the Nyquist bin) are ignored.
Field fft_inverse(const Spectrum& spectrum);

/// d^order/dx_axis^order computed as F^-1((i 2 pi k / L)^order F u).
/// The Nyquist bin along `axis` is zeroed for odd orders.
Field spectral_derivative(const Field& field, int order, int axis = 0);

/// Zeroes every coefficient whose |wavenumber| on some axis exceeds k_max
/// for that axis.
Spectrum mode_truncate(const Spectrum& spectrum, std::array<int, 2> k_max);
Spectrum mode_truncate(const Spectrum& spectrum, int k_max);

/// Moves a spectrum onto a grid of different resolution (same extent) by
/// zero-padding or truncating, rescaled so the represented physical
/// function is unchanged. Nyquist bins of the source are dropped when
/// padding.
Spectrum spectral_resize(const Spectrum& spectrum, const Grid& target);

}  // namespace ndop
