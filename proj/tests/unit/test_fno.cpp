#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "ndop/error.hpp"
#include "ndop/fno.hpp"
#include "test_util.hpp"

namespace ndop {
namespace {

using std::numbers::pi;

FnoSpec small_spec(int dims = 1) {
  FnoSpec s;
  s.dims = dims;
  s.width = 4;
  s.k_max = {3, 3};
  s.n_layers = 2;
  s.projection_width = 6;
  return s;
}

double dot(const Field& a, const Field& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Count written out per block, independent of the layout code.
std::size_t expected_count(int dims, int d_v, std::array<int, 2> k, int layers, int in, int out, int pw) {
  const std::size_t modes = dims == 1 ? std::size_t(k[0] + 1) : std::size_t((2 * k[0] + 1) * (k[1] + 1));
  const std::size_t lift = std::size_t(in * d_v + d_v);
  const std::size_t layer = 2 * modes * d_v * d_v + std::size_t(d_v * d_v + d_v);
  const std::size_t proj = pw == 0 ? std::size_t(d_v * out + out) : std::size_t(d_v * pw + pw + pw * out + out);
  return lift + layers * layer + proj;
}

TEST(FnoCount, ClosedFormMatchesFlattenLength) {
  FnoSpec s;
  s.width = 4;
  s.k_max = {2, 2};
  s.n_layers = 2;
  s.projection_width = 0;
  ASSERT_EQ(s.lifted_channels(), 2);
  EXPECT_EQ(expected_count(1, 4, {2, 2}, 2, 2, 1, 0), 249u);
  EXPECT_EQ(fno_parameter_count(s), 249u);
  Rng rng(0);
  EXPECT_EQ(params_flatten(fno_init(s, rng)).size(), 249u);

  s.projection_width = 128;
  EXPECT_EQ(fno_parameter_count(s), expected_count(1, 4, {2, 2}, 2, 2, 1, 128));
  EXPECT_EQ(fno_layout(s).total, fno_parameter_count(s));

  const FnoSpec t = small_spec(2);
  EXPECT_EQ(fno_parameter_count(t), expected_count(2, 4, {3, 3}, 2, 3, 1, 6));
}

TEST(FnoInit, SameSeedSameParameters) {
  Rng a(5), b(5), c(6);
  const FnoSpec s = small_spec();
  EXPECT_EQ(fno_init(s, a).values, fno_init(s, b).values);
  EXPECT_NE(fno_init(s, a).values, fno_init(s, c).values);
}

TEST(FnoInit, ScalesAndZeroBiases) {
  FnoSpec s;
  s.width = 8;
  s.k_max = {4, 4};
  s.n_layers = 1;
  s.projection_width = 16;
  Rng rng(2);
  const FnoParams p = fno_init(s, rng);
  const FnoLayout l = fno_layout(s);
  for (std::size_t i = 0; i < std::size_t(s.width); ++i) {
    EXPECT_EQ(p.values[l.lift_bias + i], 0.0);
    EXPECT_EQ(p.values[l.layers[0].bias + i], 0.0);
  }
  for (std::size_t i = l.layers[0].spectral; i < l.layers[0].weight; ++i) {
    EXPECT_GE(p.values[i], 0.0);
    EXPECT_LT(p.values[i], 1.0 / 64.0);
  }
  for (std::size_t i = l.layers[0].weight; i < l.layers[0].bias; ++i) EXPECT_LE(std::abs(p.values[i]), 1.0 / 8.0);
  for (std::size_t i = l.lift_weight; i < l.lift_bias; ++i) EXPECT_LE(std::abs(p.values[i]), 1.0 / 2.0);
}

TEST(FnoForward, ZeroInputWithoutCoordinatesIsConstant) {
  FnoSpec s = small_spec();
  s.append_coordinates = false;
  Rng rng(1);
  FnoParams p = fno_init(s, rng);
  // Non-zero biases so the constant is not trivially zero.
  const FnoLayout l = fno_layout(s);
  for (std::size_t i = 0; i < std::size_t(s.width); ++i) p.values[l.lift_bias + i] = 0.1 * (i + 1);
  const Field out = fno_forward(p, Field(Grid::line(32, 1.0)));
  for (std::size_t i = 1; i < out.size(); ++i) EXPECT_NEAR(out[i], out[0], 1e-14);
  EXPECT_NE(out[0], 0.0);
}

TEST(FnoForward, ZeroWeightsGiveProjectionBias) {
  const FnoSpec s = small_spec();
  FnoParams p{s, ParamVector(fno_parameter_count(s), 0.0)};
  p.values[fno_layout(s).proj2_bias] = 0.37;
  Rng rng(3);
  const Field out = fno_forward(p, test::random_field(Grid::line(16, 1.0), rng));
  for (std::size_t i = 0; i < out.size(); ++i) EXPECT_EQ(out[i], 0.37);
}

FnoParams band_limited_identity(int k_max) {
  FnoSpec s;
  s.width = 1;
  s.k_max = {k_max, k_max};
  s.n_layers = 1;
  s.activation = Activation::kIdentity;
  s.append_coordinates = false;
  s.projection_width = 0;
  FnoParams p{s, ParamVector(fno_parameter_count(s), 0.0)};
  const FnoLayout l = fno_layout(s);
  p.values[l.lift_weight] = 1.0;
  p.values[l.proj2_weight] = 1.0;
  for (int m = 0; m <= k_max; ++m) p.values[l.layers[0].spectral + 2 * std::size_t(m)] = 1.0;
  return p;
}

TEST(FnoForward, IdentitySpectralLayerIsModeTruncation) {
  const FnoParams p = band_limited_identity(5);
  Rng rng(4);
  const Field u = test::random_field(Grid::line(32, 1.0), rng);
  const Field oracle = fft_inverse(mode_truncate(fft_forward(u), 5));
  EXPECT_LT(test::max_abs_diff(fno_forward(p, u), oracle), 1e-12);
}

TEST(FnoForward, TruncatedLinearOperatorIsResolutionIndependent) {
  const FnoParams p = band_limited_identity(4);
  auto f = [](double x, double) { return std::sin(2 * pi * x) + 0.3 * std::cos(6 * pi * x) + 0.2 * std::sin(20 * pi * x); };
  const Field a = fno_forward(p, test::sample(Grid::line(32, 1.0), f));
  const Field b = fno_forward(p, test::sample(Grid::line(64, 1.0), f));
  EXPECT_LT(test::max_abs_diff(a, b.subsampled(2)), 1e-12);
}

TEST(FnoForward, SingleLayerWithoutPointwiseIsBandLimited) {
  FnoSpec s = small_spec();
  s.n_layers = 1;
  s.activation = Activation::kIdentity;
  Rng rng(8);
  FnoParams p = fno_init(s, rng);
  const FnoLayout l = fno_layout(s);
  for (std::size_t i = l.layers[0].weight; i < l.layers[0].bias; ++i) p.values[i] = 0.0;
  const Spectrum out = fft_forward(fno_forward(p, test::random_field(Grid::line(32, 1.0), rng)));
  double peak = 0.0;
  for (std::size_t k = 0; k < out.size(); ++k) peak = std::max(peak, std::abs(out[k]));
  for (std::size_t k = 4; k < out.size(); ++k) EXPECT_LT(std::abs(out[k]), 1e-12 * peak) << "k=" << k;
}

TEST(FnoForward, CrossResolutionConsistency) {
  FnoSpec s;
  s.width = 16;
  s.k_max = {8, 8};
  s.n_layers = 4;
  s.projection_width = 32;
  Rng rng(11);
  const FnoParams p = fno_init(s, rng);
  auto f = [](double x, double) { return std::sin(2 * pi * x); };
  const Field coarse = fno_forward(p, test::sample(Grid::line(64, 1.0), f));
  const Field fine = fno_forward(p, test::sample(Grid::line(128, 1.0), f)).subsampled(2);
  EXPECT_LT(test::l2(coarse - fine) / test::l2(fine), 1e-2);
}

TEST(FnoForward, TranslationEquivariance) {
  for (int dims : {1, 2}) {
    FnoSpec s = small_spec(dims);
    s.append_coordinates = false;
    Rng rng(13);
    const FnoParams p = fno_init(s, rng);
    const Grid g = dims == 1 ? Grid::line(16, 1.0) : Grid::plane(12, 10, 1.0, 2.0);
    const Field u = test::random_field(g, rng);
    const std::array<int, 2> shift{5, dims == 2 ? 3 : 0};
    const Field lhs = fno_forward(p, u.shifted(shift));
    const Field rhs = fno_forward(p, u).shifted(shift);
    EXPECT_LT(test::max_abs_diff(lhs, rhs), 1e-10) << "dims=" << dims;
  }
}

TEST(FnoForward, IdentityActivationIsAffine) {
  FnoSpec s = small_spec();
  s.activation = Activation::kIdentity;
  Rng rng(14);
  FnoParams p = fno_init(s, rng);
  const Grid g = Grid::line(16, 1.0);
  const Field u = test::random_field(g, rng), v = test::random_field(g, rng);
  const Field f0 = fno_forward(p, Field(g));
  const Field lhs = fno_forward(p, 2.0 * u + (-0.5) * v) - f0;
  const Field rhs = 2.0 * (fno_forward(p, u) - f0) + (-0.5) * (fno_forward(p, v) - f0);
  EXPECT_LT(test::max_abs_diff(lhs, rhs), 1e-10);
}

TEST(FnoForward, RejectsGridTooSmallAndChannelMismatch) {
  FnoSpec s = small_spec();
  s.k_max = {4, 4};
  Rng rng(0);
  const FnoParams p = fno_init(s, rng);
  EXPECT_THROW(fno_forward(p, Field(Grid::line(8, 1.0))), InvalidArgument);
  EXPECT_NO_THROW(fno_forward(p, Field(Grid::line(10, 1.0))));
  EXPECT_THROW(fno_forward(p, Field(Grid::line(16, 1.0), 2)), ShapeError);
  EXPECT_THROW(fno_forward(p, Field(Grid::plane(16, 16, 1.0, 1.0))), ShapeError);
}

TEST(FnoParamsFlat, RoundTripAndLocality) {
  const FnoSpec s = small_spec();
  Rng rng(21);
  const FnoParams p = fno_init(s, rng);
  const ParamVector flat = params_flatten(p);
  EXPECT_EQ(params_unflatten(s, flat).values, p.values);
  EXPECT_THROW(params_unflatten(s, ParamVector(flat.size() + 1)), ShapeError);
  ParamVector bumped = flat;
  bumped[17] += 1.0;
  const FnoParams q = params_unflatten(s, bumped);
  std::size_t changed = 0;
  for (std::size_t i = 0; i < flat.size(); ++i) changed += q.values[i] != p.values[i];
  EXPECT_EQ(changed, 1u);
}

// <c, f(theta, u)> perturbed along one parameter or input entry.
struct Probe {
  FnoParams p;
  Field u, c;
  double value() const { return dot(c, fno_forward(p, u)); }
};

void check_vjp_against_fd(Probe probe) {
  const FnoGradient g = fno_vjp(probe.p, probe.u, probe.c);
  ASSERT_EQ(g.params.size(), probe.p.values.size());
  const double h = 1e-6;
  double worst = 0.0;
  for (std::size_t i = 0; i < probe.p.values.size(); ++i) {
    const double keep = probe.p.values[i];
    probe.p.values[i] = keep + h;
    const double up = probe.value();
    probe.p.values[i] = keep - h;
    const double down = probe.value();
    probe.p.values[i] = keep;
    const double fd = (up - down) / (2 * h);
    worst = std::max(worst, std::abs(g.params[i] - fd) / std::max(std::abs(fd), 1e-3));
  }
  for (std::size_t i = 0; i < probe.u.size(); ++i) {
    const double keep = probe.u[i];
    probe.u[i] = keep + h;
    const double up = probe.value();
    probe.u[i] = keep - h;
    const double down = probe.value();
    probe.u[i] = keep;
    const double fd = (up - down) / (2 * h);
    worst = std::max(worst, std::abs(g.input[i] - fd) / std::max(std::abs(fd), 1e-3));
  }
  EXPECT_LT(worst, 1e-6);
}

TEST(FnoVjp, MatchesFiniteDifferences1d) {
  FnoSpec s;
  s.width = 2;
  s.k_max = {2, 2};
  s.n_layers = 2;
  s.projection_width = 3;
  Rng rng(31);
  FnoParams p = fno_init(s, rng);
  // Non-zero biases exercise every adjoint path.
  for (double& v : p.values) v += 0.05 * rng.normal();
  const Grid g = Grid::line(16, 1.0);
  check_vjp_against_fd({p, test::random_field(g, rng), test::random_field(g, rng)});
}

TEST(FnoVjp, MatchesFiniteDifferences2d) {
  FnoSpec s;
  s.dims = 2;
  s.width = 2;
  s.k_max = {2, 2};
  s.n_layers = 1;
  s.activation = Activation::kTanh;
  s.projection_width = 0;
  Rng rng(32);
  FnoParams p = fno_init(s, rng);
  for (double& v : p.values) v += 0.05 * rng.normal();
  const Grid g = Grid::plane(8, 6, 1.0, 1.5);
  check_vjp_against_fd({p, test::random_field(g, rng), test::random_field(g, rng)});
}

TEST(FnoVjp, ZeroAndLinearInCotangent) {
  const FnoSpec s = small_spec();
  Rng rng(33);
  const FnoParams p = fno_init(s, rng);
  const Grid g = Grid::line(16, 1.0);
  const Field u = test::random_field(g, rng);
  const FnoGradient z = fno_vjp(p, u, Field(g));
  for (double v : z.params) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(z.input.max_abs(), 0.0);

  const Field c1 = test::random_field(g, rng), c2 = test::random_field(g, rng);
  const FnoGradient a = fno_vjp(p, u, c1), b = fno_vjp(p, u, c2), ab = fno_vjp(p, u, c1 + c2);
  for (std::size_t i = 0; i < ab.params.size(); ++i) EXPECT_NEAR(ab.params[i], a.params[i] + b.params[i], 1e-12);
  EXPECT_LT(test::max_abs_diff(ab.input, a.input + b.input), 1e-12);
  EXPECT_THROW(fno_vjp(p, u, Field(Grid::line(32, 1.0))), ShapeError);
}

TEST(FnoFieldAdapter, RecordedEvaluationAndBackwardAgree) {
  const FnoSpec s = small_spec();
  Rng rng(34);
  auto p = std::make_shared<const FnoParams>(fno_init(s, rng));
  const FnoField f(p);
  const Grid g = Grid::line(16, 1.0);
  const Field u = test::random_field(g, rng), c = test::random_field(g, rng);
  std::unique_ptr<Tape> tape;
  const Field y = f.evaluate_recorded(u, 0.0, tape);
  EXPECT_EQ(test::max_abs_diff(y, f.evaluate(u, 0.0)), 0.0);
  EXPECT_EQ(test::max_abs_diff(y, fno_forward(*p, u)), 0.0);
  std::vector<double> grad(f.parameter_count(), 0.0);
  const Field gu = f.backward(*tape, c, grad);
  const FnoGradient ref = fno_vjp(*p, u, c);
  EXPECT_EQ(test::max_abs_diff(gu, ref.input), 0.0);
  EXPECT_EQ(grad, ref.params);
}

TEST(FnoSpecNames, ActivationRoundTrip) {
  for (Activation a : {Activation::kGelu, Activation::kTanh, Activation::kRelu, Activation::kIdentity}) {
    EXPECT_EQ(activation_from_string(to_string(a)), a);
  }
  EXPECT_THROW(activation_from_string("swish"), InvalidArgument);
}

}  // namespace
}  // namespace ndop
