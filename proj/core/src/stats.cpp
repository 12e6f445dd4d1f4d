#include "ndop/stats.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <queue>

#include "ndop/error.hpp"

namespace ndop {

// ---------------------------------------------------------------- spectrum

SpectrumCurve energy_spectrum(const Field& field, double time) {
  if (field.channels() != 1) throw ShapeError("energy_spectrum: single-channel field expected");
  const Grid& g = field.grid();
  const Spectrum s = fft_forward(field);
  auto co = s.channel(0);
  const double inv_n = 1.0 / static_cast<double>(g.size());
  SpectrumCurve out;
  out.time = time;
  if (g.dims() == 1) {
    for (int k = 0; k < g.half_modes(); ++k) {
      out.k.push_back(k);
      out.energy.push_back(0.5 * std::norm(co[k] * inv_n));
    }
    return out;
  }
  const int nx = g.n(0), ny = g.n(1), half = g.half_modes();
  const double kmax = std::hypot(nx / 2.0, ny / 2.0);
  const auto shells = static_cast<std::size_t>(std::lround(kmax)) + 1;
  out.energy.assign(shells, 0.0);
  for (std::size_t s = 0; s < shells; ++s) out.k.push_back(static_cast<double>(s));
  for (int i = 0; i < nx; ++i) {
    const int kx = signed_wavenumber(i, nx);
    for (int j = 0; j < half; ++j) {
      // Bins strictly inside the halved axis stand for a conjugate pair.
      const double mult = (j == 0 || 2 * j == ny) ? 1.0 : 2.0;
      const auto shell = static_cast<std::size_t>(std::lround(std::hypot(kx, j)));
      out.energy[shell] += mult * 0.5 * std::norm(co[static_cast<std::size_t>(i) * half + j] * inv_n);
    }
  }
  return out;
}

SpectrumCurve mean_spectrum(std::span<const SpectrumCurve> curves) {
  if (curves.empty()) throw InvalidArgument("mean_spectrum: no curves");
  SpectrumCurve out = curves.front();
  for (std::size_t c = 1; c < curves.size(); ++c) {
    if (curves[c].k != out.k) throw ShapeError("mean_spectrum: wavenumber grids differ");
    for (std::size_t i = 0; i < out.energy.size(); ++i) out.energy[i] += curves[c].energy[i];
  }
  for (double& e : out.energy) e /= static_cast<double>(curves.size());
  return out;
}

double spectrum_slope(const SpectrumCurve& curve, double k_lo, double k_hi) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (std::size_t i = 0; i < curve.k.size(); ++i) {
    if (curve.k[i] < k_lo || curve.k[i] > k_hi || curve.k[i] <= 0.0 || curve.energy[i] <= 0.0) continue;
    const double x = std::log(curve.k[i]);
    const double y = std::log(curve.energy[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++n;
  }
  if (n < 2) throw InvalidArgument("spectrum_slope: fewer than two usable points in range");
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

// ---------------------------------------------------------------- kNN KL

namespace {

// Static kd-tree over a point-major cloud, answering k-th nearest neighbour
// distance queries.
class KdTree {
 public:
  KdTree(const SampleCloud& cloud) : cloud_(cloud), index_(cloud.size()) {
    std::iota(index_.begin(), index_.end(), std::size_t{0});
    nodes_.reserve(2 * cloud.size() / kLeaf + 2);
    build(0, index_.size(), 0);
  }

  // Distance to the k-th nearest point, skipping index `exclude`.
  double kth_distance(const double* x, int k, std::size_t exclude) const {
    std::priority_queue<double> best;  // squared distances, max on top
    search(0, x, k, exclude, best);
    return std::sqrt(best.top());
  }

 private:
  static constexpr std::size_t kLeaf = 16;

  struct Node {
    std::size_t begin, end;
    int axis = -1;  // -1: leaf
    double split = 0.0;
    std::size_t left = 0, right = 0;
  };

  double coord(std::size_t i, int a) const { return cloud_.points[i * cloud_.dim + a]; }

  std::size_t build(std::size_t begin, std::size_t end, int depth) {
    const std::size_t id = nodes_.size();
    nodes_.push_back({begin, end});
    if (end - begin <= kLeaf) return id;
    // Split on the widest axis at the median.
    int axis = 0;
    double widest = -1.0;
    for (int a = 0; a < cloud_.dim; ++a) {
      double lo = coord(index_[begin], a), hi = lo;
      for (std::size_t i = begin; i < end; ++i) {
        lo = std::min(lo, coord(index_[i], a));
        hi = std::max(hi, coord(index_[i], a));
      }
      if (hi - lo > widest) {
        widest = hi - lo;
        axis = a;
      }
    }
    const std::size_t mid = begin + (end - begin) / 2;
    std::nth_element(index_.begin() + static_cast<long>(begin), index_.begin() + static_cast<long>(mid),
                     index_.begin() + static_cast<long>(end),
                     [&](std::size_t a, std::size_t b) { return coord(a, axis) < coord(b, axis); });
    const double split = coord(index_[mid], axis);
    const std::size_t left = build(begin, mid, depth + 1);
    const std::size_t right = build(mid, end, depth + 1);
    nodes_[id].axis = axis;
    nodes_[id].split = split;
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
  }

  void search(std::size_t id, const double* x, int k, std::size_t exclude, std::priority_queue<double>& best) const {
    const Node& node = nodes_[id];
    if (node.axis < 0) {
      for (std::size_t i = node.begin; i < node.end; ++i) {
        const std::size_t p = index_[i];
        if (p == exclude) continue;
        double d2 = 0.0;
        for (int a = 0; a < cloud_.dim; ++a) {
          const double d = coord(p, a) - x[a];
          d2 += d * d;
        }
        if (static_cast<int>(best.size()) < k) {
          best.push(d2);
        } else if (d2 < best.top()) {
          best.pop();
          best.push(d2);
        }
      }
      return;
    }
    const double diff = x[node.axis] - node.split;
    const std::size_t near = diff < 0.0 ? node.left : node.right;
    const std::size_t far = diff < 0.0 ? node.right : node.left;
    search(near, x, k, exclude, best);
    if (static_cast<int>(best.size()) < k || diff * diff < best.top()) search(far, x, k, exclude, best);
  }

  const SampleCloud& cloud_;
  std::vector<std::size_t> index_;
  std::vector<Node> nodes_;
};

constexpr std::size_t kNoExclude = static_cast<std::size_t>(-1);

}  // namespace

double kl_divergence_knn(const SampleCloud& p, const SampleCloud& q, int k, KlDiagnostics* diag) {
  if (p.dim < 1 || p.dim != q.dim) throw InvalidArgument("kl_divergence_knn: sample dimensions differ");
  if (k < 1) throw InvalidArgument("kl_divergence_knn: k must be >= 1");
  const std::size_t n = p.size(), m = q.size();
  const bool same = &p == &q;
  if (n <= static_cast<std::size_t>(k) || m < static_cast<std::size_t>(k) + (same ? 1 : 0)) {
    throw InvalidArgument("kl_divergence_knn: too few samples for k neighbours");
  }
  for (double v : p.points) {
    if (!std::isfinite(v)) throw NumericError("kl_divergence_knn: non-finite sample");
  }
  for (double v : q.points) {
    if (!std::isfinite(v)) throw NumericError("kl_divergence_knn: non-finite sample");
  }
  const KdTree tp(p);
  const KdTree tq(q);
  std::size_t jittered = 0;
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double* x = p.points.data() + i * p.dim;
    double rho = tp.kth_distance(x, k, i);
    double nu = tq.kth_distance(x, k, same ? i : kNoExclude);
    if (rho < kKnnJitter) {
      rho = kKnnJitter;
      ++jittered;
    }
    if (nu < kKnnJitter) {
      nu = kKnnJitter;
      ++jittered;
    }
    sum += std::log(nu / rho);
  }
  if (jittered > 0) {
    std::clog << "warning: kl_divergence_knn: " << jittered << " zero neighbour distance(s) raised to "
              << kKnnJitter << "\n";
  }
  if (diag) diag->jittered = jittered;
  const double mq = same ? static_cast<double>(m - 1) : static_cast<double>(m);
  return static_cast<double>(p.dim) / static_cast<double>(n) * sum +
         std::log(mq / static_cast<double>(n - 1));
}

// ---------------------------------------------------------------- ACF

std::vector<double> acf(const Trajectory& traj, AcfAxis axis, int max_lag) {
  if (max_lag < 0) throw InvalidArgument("acf: max_lag must be >= 0");
  if (traj.states.empty()) throw InvalidArgument("acf: empty trajectory");
  const std::size_t t_count = traj.states.size();
  const std::size_t points = traj.states.front().size();
  std::vector<double> out(static_cast<std::size_t>(max_lag) + 1, 0.0);

  auto accumulate = [&](const std::vector<double>& s, bool periodic) {
    const double mean = std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size());
    std::vector<double> c(s.size());
    double c0 = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      c[i] = s[i] - mean;
      c0 += c[i] * c[i];
    }
    if (!(c0 > 0.0)) throw NumericError("acf: zero-variance series");
    for (std::size_t l = 0; l < out.size(); ++l) {
      double acc = 0.0;
      if (periodic) {
        for (std::size_t i = 0; i < s.size(); ++i) acc += c[i] * c[(i + l) % s.size()];
      } else {
        for (std::size_t i = 0; i + l < s.size(); ++i) acc += c[i] * c[i + l];
      }
      out[l] += acc / c0;
    }
  };

  if (axis == AcfAxis::kTemporal) {
    if (static_cast<std::size_t>(max_lag) >= t_count) throw InvalidArgument("acf: max_lag exceeds the series length");
    std::vector<double> s(t_count);
    for (std::size_t x = 0; x < points; ++x) {
      for (std::size_t t = 0; t < t_count; ++t) s[t] = traj.states[t][x];
      accumulate(s, false);
    }
    for (double& v : out) v /= static_cast<double>(points);
  } else {
    const Grid& g = traj.grid;
    const int nx = g.n(0);
    if (max_lag >= nx) throw InvalidArgument("acf: max_lag exceeds the grid length");
    const int ny = g.dims() == 2 ? g.n(1) : 1;
    std::vector<double> s(static_cast<std::size_t>(nx));
    for (const Field& f : traj.states) {
      for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) s[static_cast<std::size_t>(i)] = f[static_cast<std::size_t>(i) * ny + j];
        accumulate(s, true);
      }
    }
    for (double& v : out) v /= static_cast<double>(t_count * static_cast<std::size_t>(ny));
  }
  return out;
}

std::size_t first_zero_crossing(std::span<const double> values) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] <= 0.0) return i;
  }
  return values.size();
}

// ---------------------------------------------------------------- moments

Moments moments(std::span<const double> x) {
  if (x.size() < 4) throw InvalidArgument("moments: need at least 4 samples");
  const double n = static_cast<double>(x.size());
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double m2 = 0, m3 = 0, m4 = 0;
  for (double v : x) {
    const double d = v - mean;
    const double d2 = d * d;
    m2 += d2;
    m3 += d2 * d;
    m4 += d2 * d2;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  if (!(m2 > 0.0)) throw NumericError("moments: zero variance");
  return {mean, m2, m3 / std::pow(m2, 1.5), m4 / (m2 * m2) - 3.0};
}

// ---------------------------------------------------------------- histograms

Histogram histogram(const SampleCloud& samples, std::span<const int> bins, std::span<const double> lo,
                    std::span<const double> hi) {
  const int d = samples.dim;
  if (d != 1 && d != 2) throw InvalidArgument("histogram: 1-D or 2-D samples expected");
  if (samples.size() == 0) throw InvalidArgument("histogram: no samples");
  if (static_cast<int>(bins.size()) != d || static_cast<int>(lo.size()) != d || static_cast<int>(hi.size()) != d) {
    throw InvalidArgument("histogram: bins and range need one entry per dimension");
  }
  Histogram h;
  std::size_t cells = 1;
  double cell_volume = 1.0;
  for (int a = 0; a < d; ++a) {
    if (bins[a] < 1) throw InvalidArgument("histogram: bins must be >= 1");
    if (!(hi[a] > lo[a])) throw InvalidArgument("histogram: empty range");
    h.lo.push_back(lo[a]);
    h.hi.push_back(hi[a]);
    h.bins.push_back(bins[a]);
    cells *= static_cast<std::size_t>(bins[a]);
    cell_volume *= (hi[a] - lo[a]) / bins[a];
  }
  h.density.assign(cells, 0.0);
  std::size_t inside = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    std::size_t cell = 0;
    bool ok = true;
    for (int a = 0; a < d; ++a) {
      const double v = samples.points[i * d + a];
      if (!(v >= lo[a] && v < hi[a])) {
        ok = false;
        break;
      }
      auto b = static_cast<std::size_t>((v - lo[a]) / (hi[a] - lo[a]) * bins[a]);
      b = std::min(b, static_cast<std::size_t>(bins[a] - 1));
      cell = cell * static_cast<std::size_t>(bins[a]) + b;
    }
    if (!ok) continue;
    h.density[cell] += 1.0;
    ++inside;
  }
  if (inside == 0) throw InvalidArgument("histogram: no samples inside the range");
  for (double& v : h.density) v /= static_cast<double>(inside) * cell_volume;
  return h;
}

SampleCloud derivative_samples(const Trajectory& traj, int order) {
  if (order < 0) throw InvalidArgument("derivative_samples: order must be >= 0");
  SampleCloud out;
  for (const Field& f : traj.states) {
    const Field v = order == 0 ? f : spectral_derivative(f, order, 0);
    out.points.insert(out.points.end(), v.values().begin(), v.values().end());
  }
  return out;
}

SampleCloud joint_derivative_samples(const Trajectory& traj) {
  SampleCloud out;
  out.dim = 2;
  for (const Field& f : traj.states) {
    const Field ux = spectral_derivative(f, 1, 0);
    const Field uxx = spectral_derivative(f, 2, 0);
    for (std::size_t i = 0; i < f.size(); ++i) {
      out.points.push_back(ux[i]);
      out.points.push_back(uxx[i]);
    }
  }
  return out;
}

}  // namespace ndop
