#include "ndop/fno.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <tuple>

#include "mode_transform.hpp"
#include "ndop/error.hpp"

namespace ndop {

using Eigen::MatrixXd;
using ConstMap = Eigen::Map<const MatrixXd>;
using MutMap = Eigen::Map<MatrixXd>;

// ---------------------------------------------------------------- spec

std::string to_string(Activation a) {
  switch (a) {
    case Activation::kGelu: return "gelu";
    case Activation::kTanh: return "tanh";
    case Activation::kRelu: return "relu";
    case Activation::kIdentity: return "identity";
  }
  return "unknown";
}

Activation activation_from_string(const std::string& name) {
  if (name == "gelu") return Activation::kGelu;
  if (name == "tanh") return Activation::kTanh;
  if (name == "relu") return Activation::kRelu;
  if (name == "identity") return Activation::kIdentity;
  throw InvalidArgument("unknown activation '" + name + "' (expected gelu, tanh, relu or identity)");
}

int FnoSpec::modes() const noexcept {
  if (dims == 1) return k_max[0] + 1;
  return (2 * k_max[0] + 1) * (k_max[1] + 1);
}

void FnoSpec::validate() const {
  if (dims != 1 && dims != 2) throw InvalidArgument("fno: dims must be 1 or 2");
  if (width < 1) throw InvalidArgument("fno: width (d_v) must be >= 1");
  if (n_layers < 1) throw InvalidArgument("fno: n_layers must be >= 1");
  for (int a = 0; a < dims; ++a) {
    if (k_max[a] < 0) throw InvalidArgument("fno: k_max must be >= 0");
  }
  if (in_channels < 1 || out_channels < 1) throw InvalidArgument("fno: channel counts must be >= 1");
  if (projection_width < 0) throw InvalidArgument("fno: projection_width must be >= 0");
}

FnoLayout fno_layout(const FnoSpec& spec) {
  spec.validate();
  const std::size_t dv = spec.width;
  const std::size_t cin = spec.lifted_channels();
  const std::size_t cout = spec.out_channels;
  const std::size_t modes = spec.modes();
  FnoLayout lay;
  std::size_t at = 0;
  lay.lift_weight = at;
  at += dv * cin;
  lay.lift_bias = at;
  at += dv;
  for (int l = 0; l < spec.n_layers; ++l) {
    FnoLayout::Layer layer{};
    layer.spectral = at;
    at += 2 * modes * dv * dv;
    layer.weight = at;
    at += dv * dv;
    layer.bias = at;
    at += dv;
    lay.layers.push_back(layer);
  }
  std::size_t last_in = dv;
  if (spec.projection_width > 0) {
    const std::size_t pw = spec.projection_width;
    lay.proj1_weight = at;
    at += pw * dv;
    lay.proj1_bias = at;
    at += pw;
    last_in = pw;
  }
  lay.proj2_weight = at;
  at += cout * last_in;
  lay.proj2_bias = at;
  at += cout;
  lay.total = at;
  return lay;
}

std::size_t fno_parameter_count(const FnoSpec& spec) {
  spec.validate();
  const std::size_t dv = spec.width;
  const std::size_t lift = dv * spec.lifted_channels() + dv;
  const std::size_t layer = 2 * static_cast<std::size_t>(spec.modes()) * dv * dv + dv * dv + dv;
  const std::size_t pw = spec.projection_width;
  const std::size_t cout = spec.out_channels;
  const std::size_t proj = pw > 0 ? dv * pw + pw + pw * cout + cout : dv * cout + cout;
  return lift + static_cast<std::size_t>(spec.n_layers) * layer + proj;
}

// ---------------------------------------------------------------- params

FnoParams fno_init(const FnoSpec& spec, Rng& rng) {
  const FnoLayout lay = fno_layout(spec);
  FnoParams p{spec, ParamVector(lay.total, 0.0)};
  auto fill_uniform = [&](std::size_t offset, std::size_t count, double lo, double hi) {
    for (std::size_t i = 0; i < count; ++i) p.values[offset + i] = rng.uniform(lo, hi);
  };
  const std::size_t dv = spec.width;
  const double cin = spec.lifted_channels();
  fill_uniform(lay.lift_weight, dv * spec.lifted_channels(), -1.0 / cin, 1.0 / cin);
  const double spectral_scale = 1.0 / static_cast<double>(dv * dv);
  for (const auto& layer : lay.layers) {
    fill_uniform(layer.spectral, 2 * spec.modes() * dv * dv, 0.0, spectral_scale);
    fill_uniform(layer.weight, dv * dv, -1.0 / dv, 1.0 / dv);
  }
  if (spec.projection_width > 0) {
    const std::size_t pw = spec.projection_width;
    fill_uniform(lay.proj1_weight, pw * dv, -1.0 / dv, 1.0 / dv);
    fill_uniform(lay.proj2_weight, spec.out_channels * pw, -1.0 / pw, 1.0 / pw);
  } else {
    fill_uniform(lay.proj2_weight, spec.out_channels * dv, -1.0 / dv, 1.0 / dv);
  }
  return p;
}

ParamVector params_flatten(const FnoParams& params) { return params.values; }

FnoParams params_unflatten(const FnoSpec& spec, ParamVector values) {
  const std::size_t expected = fno_parameter_count(spec);
  if (values.size() != expected) {
    throw ShapeError("parameter vector has length " + std::to_string(values.size()) + ", spec needs " +
                     std::to_string(expected));
  }
  return FnoParams{spec, std::move(values)};
}

// ---------------------------------------------------------------- network

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

void activate(Activation a, const MatrixXd& z, MatrixXd& out) {
  out.resize(z.rows(), z.cols());
  const double* zi = z.data();
  double* oi = out.data();
  const long n = z.size();
  switch (a) {
    case Activation::kGelu:
      for (long i = 0; i < n; ++i) oi[i] = 0.5 * zi[i] * (1.0 + std::erf(zi[i] * kInvSqrt2));
      break;
    case Activation::kTanh:
      for (long i = 0; i < n; ++i) oi[i] = std::tanh(zi[i]);
      break;
    case Activation::kRelu:
      for (long i = 0; i < n; ++i) oi[i] = zi[i] > 0.0 ? zi[i] : 0.0;
      break;
    case Activation::kIdentity:
      out = z;
      break;
  }
}

// g <- g * sigma'(z)
void activate_backward(Activation a, const MatrixXd& z, MatrixXd& g) {
  const double* zi = z.data();
  double* gi = g.data();
  const long n = z.size();
  switch (a) {
    case Activation::kGelu:
      for (long i = 0; i < n; ++i) {
        const double x = zi[i];
        gi[i] *= 0.5 * (1.0 + std::erf(x * kInvSqrt2)) + x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
      }
      break;
    case Activation::kTanh:
      for (long i = 0; i < n; ++i) {
        const double t = std::tanh(zi[i]);
        gi[i] *= 1.0 - t * t;
      }
      break;
    case Activation::kRelu:
      for (long i = 0; i < n; ++i) gi[i] = zi[i] > 0.0 ? gi[i] : 0.0;
      break;
    case Activation::kIdentity:
      break;
  }
}

// Transforms are immutable once built, so one process-wide cache serves
// every thread.
std::shared_ptr<const detail::ModeTransform> transform_for(const Grid& grid, std::array<int, 2> k_max) {
  using Key = std::tuple<int, int, int, double, double, int, int>;
  static std::mutex mutex;
  static std::map<Key, std::shared_ptr<const detail::ModeTransform>> cache;
  const int ny = grid.dims() == 2 ? grid.n(1) : 0;
  const double ly = grid.dims() == 2 ? grid.extent(1) : 0.0;
  const int ky = grid.dims() == 2 ? k_max[1] : 0;
  const Key key{grid.dims(), grid.n(0), ny, grid.extent(0), ly, k_max[0], ky};
  {
    std::lock_guard<std::mutex> lock(mutex);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
  }
  auto built = std::make_shared<const detail::ModeTransform>(grid, k_max);
  std::lock_guard<std::mutex> lock(mutex);
  return cache.emplace(key, std::move(built)).first->second;
}

struct FnoTape final : Tape {
  Grid grid;
  MatrixXd input;                  // N x lifted channels
  std::vector<MatrixXd> v;         // layer inputs, v[0] = lifted
  std::vector<MatrixXd> z;         // pre-activations
  std::vector<MatrixXd> vhat_re;   // retained modes of v[l]
  std::vector<MatrixXd> vhat_im;
  MatrixXd v_last;                 // output of the last layer
  MatrixXd hidden;                 // projection pre-activation (two-stage)
  MatrixXd hidden_act;
};

class Network {
 public:
  Network(const FnoParams& p, const Grid& grid)
      : spec_(p.spec), lay_(fno_layout(p.spec)), theta_(p.values.data()) {
    if (p.values.size() != lay_.total) throw ShapeError("fno: parameter vector length does not match spec");
    if (grid.dims() != spec_.dims) {
      throw ShapeError("fno: " + std::to_string(grid.dims()) + "-D field given to a " +
                       std::to_string(spec_.dims) + "-D operator");
    }
    transform_ = transform_for(grid, spec_.k_max);
  }

  MatrixXd lifted_input(const Field& u) const {
    if (u.channels() != spec_.in_channels) {
      throw ShapeError("fno: expected " + std::to_string(spec_.in_channels) + " input channel(s), got " +
                       std::to_string(u.channels()));
    }
    const Grid& g = u.grid();
    const long n = static_cast<long>(g.size());
    MatrixXd a(n, spec_.lifted_channels());
    a.leftCols(spec_.in_channels) = ConstMap(u.values().data(), n, spec_.in_channels);
    if (spec_.append_coordinates) {
      const int c0 = spec_.in_channels;
      if (g.dims() == 1) {
        for (long i = 0; i < n; ++i) a(i, c0) = static_cast<double>(i) / g.n(0);
      } else {
        const int ny = g.n(1);
        for (long i = 0; i < n; ++i) {
          a(i, c0) = static_cast<double>(i / ny) / g.n(0);
          a(i, c0 + 1) = static_cast<double>(i % ny) / ny;
        }
      }
    }
    return a;
  }

  // Runs the network on the lifted input; fills `tape` when non-null.
  MatrixXd forward(MatrixXd a, FnoTape* tape) const {
    const long cin = spec_.lifted_channels();
    const long dv = spec_.width;
    MatrixXd v = a * weight(lay_.lift_weight, cin, dv);
    v.rowwise() += bias(lay_.lift_bias, dv);
    if (tape) tape->input = std::move(a);

    MatrixXd re, im, ore, oim, z, next;
    for (int l = 0; l < spec_.n_layers; ++l) {
      const auto& L = lay_.layers[static_cast<std::size_t>(l)];
      transform_->forward(v, re, im);
      mix(L.spectral, re, im, ore, oim);
      z = transform_->inverse(ore, oim);
      z.noalias() += v * weight(L.weight, dv, dv);
      z.rowwise() += bias(L.bias, dv);
      activate(spec_.activation, z, next);
      if (tape) {
        tape->v.push_back(std::move(v));
        tape->z.push_back(z);
        tape->vhat_re.push_back(re);
        tape->vhat_im.push_back(im);
      }
      v = std::move(next);
    }

    const long cout = spec_.out_channels;
    MatrixXd out;
    if (spec_.projection_width > 0) {
      const long pw = spec_.projection_width;
      MatrixXd h = v * weight(lay_.proj1_weight, dv, pw);
      h.rowwise() += bias(lay_.proj1_bias, pw);
      MatrixXd s;
      activate(spec_.activation, h, s);
      out = s * weight(lay_.proj2_weight, pw, cout);
      if (tape) {
        tape->hidden = std::move(h);
        tape->hidden_act = std::move(s);
      }
    } else {
      out = v * weight(lay_.proj2_weight, dv, cout);
    }
    out.rowwise() += bias(lay_.proj2_bias, cout);
    if (tape) tape->v_last = std::move(v);
    return out;
  }

  // Returns the gradient with respect to the lifted input and accumulates
  // parameter gradients into `grad`.
  MatrixXd backward(const FnoTape& t, const MatrixXd& gout, double* grad) const {
    const long cin = spec_.lifted_channels();
    const long dv = spec_.width;
    const long cout = spec_.out_channels;
    MatrixXd gv;
    if (spec_.projection_width > 0) {
      const long pw = spec_.projection_width;
      grad_map(grad, lay_.proj2_weight, pw, cout).noalias() += t.hidden_act.transpose() * gout;
      grad_bias(grad, lay_.proj2_bias, cout) += gout.colwise().sum();
      MatrixXd gh = gout * weight(lay_.proj2_weight, pw, cout).transpose();
      activate_backward(spec_.activation, t.hidden, gh);
      grad_map(grad, lay_.proj1_weight, dv, pw).noalias() += t.v_last.transpose() * gh;
      grad_bias(grad, lay_.proj1_bias, pw) += gh.colwise().sum();
      gv = gh * weight(lay_.proj1_weight, dv, pw).transpose();
    } else {
      grad_map(grad, lay_.proj2_weight, dv, cout).noalias() += t.v_last.transpose() * gout;
      grad_bias(grad, lay_.proj2_bias, cout) += gout.colwise().sum();
      gv = gout * weight(lay_.proj2_weight, dv, cout).transpose();
    }

    MatrixXd gre, gim, gore, goim;
    for (int l = spec_.n_layers - 1; l >= 0; --l) {
      const auto li = static_cast<std::size_t>(l);
      const auto& L = lay_.layers[li];
      MatrixXd& gz = gv;
      activate_backward(spec_.activation, t.z[li], gz);
      grad_map(grad, L.weight, dv, dv).noalias() += t.v[li].transpose() * gz;
      grad_bias(grad, L.bias, dv) += gz.colwise().sum();
      transform_->inverse_adjoint(gz, gore, goim);
      mix_backward(L.spectral, t.vhat_re[li], t.vhat_im[li], gore, goim, gre, gim, grad);
      MatrixXd prev = gz * weight(L.weight, dv, dv).transpose();
      prev += transform_->forward_adjoint(gre, gim);
      gv = std::move(prev);
    }

    grad_map(grad, lay_.lift_weight, cin, dv).noalias() += t.input.transpose() * gv;
    grad_bias(grad, lay_.lift_bias, dv) += gv.colwise().sum();
    return gv * weight(lay_.lift_weight, cin, dv).transpose();
  }

 private:
  // Row-major [out][in] storage read as a column-major in x out matrix, so
  // that activations (N x in) times it give N x out.
  ConstMap weight(std::size_t offset, long in, long out) const { return ConstMap(theta_ + offset, in, out); }
  Eigen::Map<const Eigen::RowVectorXd> bias(std::size_t offset, long n) const {
    return Eigen::Map<const Eigen::RowVectorXd>(theta_ + offset, n);
  }
  static MutMap grad_map(double* g, std::size_t offset, long in, long out) { return MutMap(g + offset, in, out); }
  static Eigen::Map<Eigen::RowVectorXd> grad_bias(double* g, std::size_t offset, long n) {
    return Eigen::Map<Eigen::RowVectorXd>(g + offset, n);
  }

  // out[m, o] = sum_i in[m, i] * R[m][o][i]  (complex)
  void mix(std::size_t offset, const MatrixXd& re, const MatrixXd& im, MatrixXd& ore, MatrixXd& oim) const {
    const long modes = re.rows();
    const long dv = spec_.width;
    ore.setZero(modes, dv);
    oim.setZero(modes, dv);
    for (long m = 0; m < modes; ++m) {
      for (long o = 0; o < dv; ++o) {
        const double* r = theta_ + offset + 2 * static_cast<std::size_t>((m * dv + o) * dv);
        double sr = 0.0, si = 0.0;
        for (long i = 0; i < dv; ++i) {
          const double xr = re(m, i), xi = im(m, i);
          const double wr = r[2 * i], wi = r[2 * i + 1];
          sr += xr * wr - xi * wi;
          si += xr * wi + xi * wr;
        }
        ore(m, o) = sr;
        oim(m, o) = si;
      }
    }
  }

  void mix_backward(std::size_t offset, const MatrixXd& re, const MatrixXd& im, const MatrixXd& gore,
                    const MatrixXd& goim, MatrixXd& gre, MatrixXd& gim, double* grad) const {
    const long modes = re.rows();
    const long dv = spec_.width;
    gre.setZero(modes, dv);
    gim.setZero(modes, dv);
    for (long m = 0; m < modes; ++m) {
      for (long o = 0; o < dv; ++o) {
        const std::size_t base = offset + 2 * static_cast<std::size_t>((m * dv + o) * dv);
        const double* r = theta_ + base;
        double* gr = grad + base;
        const double ar = gore(m, o), ai = goim(m, o);
        for (long i = 0; i < dv; ++i) {
          const double xr = re(m, i), xi = im(m, i);
          const double wr = r[2 * i], wi = r[2 * i + 1];
          gr[2 * i] += ar * xr + ai * xi;
          gr[2 * i + 1] += ai * xr - ar * xi;
          gre(m, i) += ar * wr + ai * wi;
          gim(m, i) += ai * wr - ar * wi;
        }
      }
    }
  }

  const FnoSpec& spec_;
  FnoLayout lay_;
  const double* theta_;
  std::shared_ptr<const detail::ModeTransform> transform_;
};

Field to_field(const Grid& grid, const MatrixXd& m) {
  return Field(grid, std::vector<double>(m.data(), m.data() + m.size()), static_cast<int>(m.cols()));
}

void check_cotangent(const FnoSpec& spec, const Grid& grid, const Field& cot) {
  if (!(cot.grid() == grid) || cot.channels() != spec.out_channels) {
    throw ShapeError("fno: cotangent does not match the operator output shape");
  }
}

}  // namespace

Field fno_forward(const FnoParams& params, const Field& u) {
  const Network net(params, u.grid());
  return to_field(u.grid(), net.forward(net.lifted_input(u), nullptr));
}

FnoGradient fno_vjp(const FnoParams& params, const Field& u, const Field& cotangent) {
  const Network net(params, u.grid());
  check_cotangent(params.spec, u.grid(), cotangent);
  FnoTape tape;
  tape.grid = u.grid();
  net.forward(net.lifted_input(u), &tape);
  FnoGradient g{ParamVector(params.values.size(), 0.0), Field()};
  const long n = static_cast<long>(u.grid().size());
  const MatrixXd gin =
      net.backward(tape, ConstMap(cotangent.values().data(), n, params.spec.out_channels), g.params.data());
  g.input = to_field(u.grid(), gin.leftCols(params.spec.in_channels));
  return g;
}

// ---------------------------------------------------------------- vector field

FnoField::FnoField(std::shared_ptr<const FnoParams> params) : params_(std::move(params)) {
  if (!params_) throw InvalidArgument("FnoField: null parameters");
  if (params_->spec.in_channels != params_->spec.out_channels) {
    throw InvalidArgument("FnoField: a vector field needs in_channels == out_channels");
  }
  fno_layout(params_->spec);
}

Field FnoField::evaluate(const Field& state, double) const { return fno_forward(*params_, state); }

Field FnoField::evaluate_recorded(const Field& state, double, std::unique_ptr<Tape>& tape) const {
  const Network net(*params_, state.grid());
  auto t = std::make_unique<FnoTape>();
  t->grid = state.grid();
  MatrixXd out = net.forward(net.lifted_input(state), t.get());
  tape = std::move(t);
  return to_field(state.grid(), out);
}

Field FnoField::backward(const Tape& tape, const Field& cotangent, std::span<double> param_grad) const {
  const auto* t = dynamic_cast<const FnoTape*>(&tape);
  if (!t) throw InvalidArgument("FnoField::backward: tape was not recorded by an FnoField");
  if (param_grad.size() != params_->values.size()) throw ShapeError("FnoField::backward: gradient length mismatch");
  check_cotangent(params_->spec, t->grid, cotangent);
  const Network net(*params_, t->grid);
  const long n = static_cast<long>(t->grid.size());
  const MatrixXd gin =
      net.backward(*t, ConstMap(cotangent.values().data(), n, params_->spec.out_channels), param_grad.data());
  return to_field(t->grid, gin.leftCols(params_->spec.in_channels));
}

}  // namespace ndop
