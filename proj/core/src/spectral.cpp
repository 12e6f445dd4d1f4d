#include <cmath>
#include <numbers>
#include <string>

#include "mode_transform.hpp"
#include "ndop/error.hpp"

namespace ndop::detail {

namespace {

// Phase 2 pi k j / n reduced modulo n in integer arithmetic, so cos/sin see
// arguments in [0, 2 pi) regardless of k and j.
double phase(long k, long j, long n) {
  const long r = ((k * j) % n + n) % n;
  return 2.0 * std::numbers::pi * static_cast<double>(r) / static_cast<double>(n);
}

void check_fit(int n, int k_max) {
  if (k_max < 0) throw InvalidArgument("spectral layer: k_max must be >= 0");
  if (n < 2 * (k_max + 1)) {
    throw InvalidArgument("spectral layer: grid of " + std::to_string(n) +
                          " points is too small for k_max=" + std::to_string(k_max) +
                          " (need n >= 2*(k_max+1))");
  }
}

}  // namespace

ModeTransform::ModeTransform(const Grid& grid, std::array<int, 2> k_max)
    : dims_(grid.dims()), points_(grid.size()) {
  const double inv_n = 1.0 / static_cast<double>(points_);
  if (dims_ == 1) {
    const int n = grid.n(0);
    check_fit(n, k_max[0]);
    modes_ = k_max[0] + 1;
    f_re_.resize(modes_, n);
    f_im_.resize(modes_, n);
    d_re_.resize(n, modes_);
    d_im_.resize(n, modes_);
    for (int k = 0; k < modes_; ++k) {
      const double w = (k == 0 ? 1.0 : 2.0) * inv_n;
      for (int j = 0; j < n; ++j) {
        const double a = phase(k, j, n);
        f_re_(k, j) = std::cos(a);
        f_im_(k, j) = -std::sin(a);
        d_re_(j, k) = w * std::cos(a);
        d_im_(j, k) = w * std::sin(a);
      }
    }
    return;
  }

  nx_ = grid.n(0);
  ny_ = grid.n(1);
  check_fit(nx_, k_max[0]);
  check_fit(ny_, k_max[1]);
  mx_ = 2 * k_max[0] + 1;
  my_ = k_max[1] + 1;
  modes_ = mx_ * my_;

  fy_.resize(my_, ny_);
  dy_.resize(ny_, my_);
  for (int ky = 0; ky < my_; ++ky) {
    const double w = (ky == 0 ? 1.0 : 2.0) * inv_n;
    for (int y = 0; y < ny_; ++y) {
      const double a = phase(ky, y, ny_);
      fy_(ky, y) = Complex(std::cos(a), -std::sin(a));
      dy_(y, ky) = Complex(w * std::cos(a), w * std::sin(a));
    }
  }
  fxt_.resize(nx_, mx_);
  gx_.resize(mx_, nx_);
  for (int ix = 0; ix < mx_; ++ix) {
    const int kx = ix <= k_max[0] ? ix : ix - mx_;
    for (int x = 0; x < nx_; ++x) {
      const double a = phase(kx, x, nx_);
      fxt_(x, ix) = Complex(std::cos(a), -std::sin(a));
      gx_(ix, x) = Complex(std::cos(a), std::sin(a));
    }
  }
}

void ModeTransform::forward(const Eigen::MatrixXd& v, Eigen::MatrixXd& re, Eigen::MatrixXd& im) const {
  if (dims_ == 1) {
    re.noalias() = f_re_ * v;
    im.noalias() = f_im_ * v;
    return;
  }
  const long c_count = v.cols();
  re.resize(modes_, c_count);
  im.resize(modes_, c_count);
  for (long c = 0; c < c_count; ++c) {
    // Column c holds v[x][y] row-major, i.e. a column-major ny x nx matrix.
    Eigen::Map<const Eigen::MatrixXd> at(v.col(c).data(), ny_, nx_);
    const Eigen::MatrixXcd h = fy_ * at.cast<Complex>();
    const Eigen::MatrixXcd spec = h * fxt_;  // My x Mx
    Eigen::Map<const Eigen::VectorXcd> flat(spec.data(), modes_);
    re.col(c) = flat.real();
    im.col(c) = flat.imag();
  }
}

Eigen::MatrixXd ModeTransform::inverse(const Eigen::MatrixXd& re, const Eigen::MatrixXd& im) const {
  if (dims_ == 1) {
    Eigen::MatrixXd out = d_re_ * re;
    out.noalias() -= d_im_ * im;
    return out;
  }
  const long c_count = re.cols();
  Eigen::MatrixXd out(static_cast<long>(points_), c_count);
  Eigen::MatrixXcd spec(my_, mx_);
  for (long c = 0; c < c_count; ++c) {
    for (int m = 0; m < modes_; ++m) spec.data()[m] = Complex(re(m, c), im(m, c));
    const Eigen::MatrixXcd z = spec * gx_;  // My x nx
    Eigen::Map<Eigen::MatrixXd> ot(out.col(c).data(), ny_, nx_);
    ot = (dy_ * z).real();
  }
  return out;
}

Eigen::MatrixXd ModeTransform::forward_adjoint(const Eigen::MatrixXd& re, const Eigen::MatrixXd& im) const {
  if (dims_ == 1) {
    Eigen::MatrixXd out = f_re_.transpose() * re;
    out.noalias() += f_im_.transpose() * im;
    return out;
  }
  const long c_count = re.cols();
  Eigen::MatrixXd out(static_cast<long>(points_), c_count);
  Eigen::MatrixXcd g(my_, mx_);
  for (long c = 0; c < c_count; ++c) {
    for (int m = 0; m < modes_; ++m) g.data()[m] = Complex(re(m, c), im(m, c));
    Eigen::Map<Eigen::MatrixXd> at(out.col(c).data(), ny_, nx_);
    at = (fy_.adjoint() * g * fxt_.adjoint()).real();
  }
  return out;
}

void ModeTransform::inverse_adjoint(const Eigen::MatrixXd& g, Eigen::MatrixXd& re, Eigen::MatrixXd& im) const {
  if (dims_ == 1) {
    re.noalias() = d_re_.transpose() * g;
    im.noalias() = -(d_im_.transpose() * g);
    return;
  }
  const long c_count = g.cols();
  re.resize(modes_, c_count);
  im.resize(modes_, c_count);
  for (long c = 0; c < c_count; ++c) {
    Eigen::Map<const Eigen::MatrixXd> gt(g.col(c).data(), ny_, nx_);
    const Eigen::MatrixXcd spec = dy_.adjoint() * gt.cast<Complex>() * gx_.adjoint();
    Eigen::Map<const Eigen::VectorXcd> flat(spec.data(), modes_);
    re.col(c) = flat.real();
    im.col(c) = flat.imag();
  }
}

}  // namespace ndop::detail
