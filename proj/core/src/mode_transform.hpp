#pragma once

// Truncated real DFT restricted to the low modes retained by a Fourier
// layer, written as dense matrix products. Equivalent to
// mode_truncate(fft_forward(.)) / fft_inverse(.) on the retained set but
// avoids full transforms per channel.
//
// Activations are N x C (column c = channel c, N = grid points in [x][y]
// row-major order). Retained-mode coefficients are M x C, split into real
// and imaginary parts.
//
// Retained set: 1-D k = 0..k_max. 2-D kx in {0..kx_max, -kx_max..-1} (FFT
// order), ky = 0..ky_max, mode index m = ix * My + iy.
//
// The inverse maps coefficients X to Re(sum_m w_m / N X_m e^{+i k.x}) with
// w_m = 1 when the last-axis wavenumber is 0 and 2 otherwise, i.e. the
// inverse real FFT of the zero-padded half spectrum.

#include <Eigen/Dense>

#include <array>

#include "ndop/tensor.hpp"

namespace ndop::detail {

class ModeTransform {
 public:
  ModeTransform(const Grid& grid, std::array<int, 2> k_max);

  int modes() const noexcept { return modes_; }
  std::size_t points() const noexcept { return points_; }

  void forward(const Eigen::MatrixXd& v, Eigen::MatrixXd& re, Eigen::MatrixXd& im) const;
  Eigen::MatrixXd inverse(const Eigen::MatrixXd& re, const Eigen::MatrixXd& im) const;

  // Adjoints under the real inner product <a, b> = sum Re(conj(a) b).
  Eigen::MatrixXd forward_adjoint(const Eigen::MatrixXd& re, const Eigen::MatrixXd& im) const;
  void inverse_adjoint(const Eigen::MatrixXd& g, Eigen::MatrixXd& re, Eigen::MatrixXd& im) const;

 private:
  int dims_;
  std::size_t points_;
  int modes_;
  int nx_ = 0, ny_ = 0, mx_ = 0, my_ = 0;

  // 1-D: forward F (M x N) and inverse D (N x M), split re/im.
  Eigen::MatrixXd f_re_, f_im_, d_re_, d_im_;

  // 2-D separable factors.
  Eigen::MatrixXcd fy_;   // My x ny, e^{-i ky y}
  Eigen::MatrixXcd fxt_;  // nx x Mx, e^{-i kx x}
  Eigen::MatrixXcd dy_;   // ny x My, (w/N) e^{+i ky y}
  Eigen::MatrixXcd gx_;   // Mx x nx, e^{+i kx x}
};

}  // namespace ndop::detail
