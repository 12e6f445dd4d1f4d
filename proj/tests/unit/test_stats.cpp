#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "ndop/error.hpp"
#include "ndop/stats.hpp"
#include "test_util.hpp"

namespace ndop {
namespace {

using std::numbers::pi;

TEST(EnergySpectrum, UnitSineHasOneEighthAtKOne) {
  const Field u = test::sample(Grid::line(64, 1.0), [](double x, double) { return std::sin(2 * pi * x); });
  const SpectrumCurve e = energy_spectrum(u, 0.7);
  ASSERT_EQ(e.k.size(), 33u);
  EXPECT_EQ(e.time, 0.7);
  EXPECT_NEAR(e.energy[1], 0.125, 1e-15);
  for (std::size_t k = 0; k < e.k.size(); ++k) {
    EXPECT_EQ(e.k[k], double(k));
    if (k != 1) {
      EXPECT_LT(e.energy[k], 1e-20);
    }
  }
}

TEST(EnergySpectrum, ConstantIsDcOnly) {
  const SpectrumCurve e = energy_spectrum(Field(Grid::line(16, 1.0), std::vector<double>(16, 3.0)));
  EXPECT_NEAR(e.energy[0], 4.5, 1e-13);
  for (std::size_t k = 1; k < e.k.size(); ++k) EXPECT_LT(e.energy[k], 1e-28);
}

TEST(EnergySpectrum, ParsevalCountingConjugatePairs) {
  Rng rng(3);
  const Field u = test::random_field(Grid::line(64, 2.0), rng);
  const SpectrumCurve e = energy_spectrum(u);
  double sum = 0.0;
  for (std::size_t k = 0; k < e.k.size(); ++k) sum += (k == 0 || k == 32 ? 1.0 : 2.0) * e.energy[k];
  double ms = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) ms += u[i] * u[i] / 64.0;
  EXPECT_NEAR(sum, 0.5 * ms, 1e-10);
}

TEST(EnergySpectrum, RadialShellsIn2d) {
  const Grid g = Grid::plane(16, 16, 1.0, 1.0);
  const Field u = test::sample(g, [](double x, double y) { return std::sin(2 * pi * x) + std::cos(2 * pi * (2 * x + 2 * y)); });
  const SpectrumCurve e = energy_spectrum(u);
  // |(1, 0)| = 1 and |(2, 2)| = 2.83 -> shell 3; each real mode carries 1/4.
  EXPECT_NEAR(e.energy[1], 0.25, 1e-14);
  EXPECT_NEAR(e.energy[3], 0.25, 1e-14);
  double total = 0.0;
  for (double v : e.energy) total += v;
  EXPECT_NEAR(total, 0.5, 1e-13);
}

TEST(EnergySpectrum, SlopeAndMean) {
  SpectrumCurve c;
  for (int k = 0; k <= 200; ++k) {
    c.k.push_back(k);
    c.energy.push_back(k == 0 ? 1.0 : 3.0 * std::pow(k, -2.0));
  }
  EXPECT_NEAR(spectrum_slope(c, 10, 100), -2.0, 1e-12);
  SpectrumCurve d = c;
  for (double& v : d.energy) v *= 3.0;
  const std::vector<SpectrumCurve> both{c, d};
  const SpectrumCurve m = mean_spectrum(both);
  EXPECT_NEAR(m.energy[10], 2.0 * c.energy[10], 1e-15);
}

SampleCloud gaussian_cloud(Rng& rng, std::size_t n, double mean, double sd) {
  SampleCloud s;
  for (std::size_t i = 0; i < n; ++i) s.points.push_back(rng.normal(mean, sd));
  return s;
}

TEST(KnnKl, IdenticalCloudsGiveZero) {
  Rng rng(1);
  const SampleCloud p = gaussian_cloud(rng, 5000, 0.0, 1.0);
  EXPECT_NEAR(kl_divergence_knn(p, p), 0.0, 0.05);
}

TEST(KnnKl, ShiftedGaussian) {
  Rng rng(2);
  const SampleCloud p = gaussian_cloud(rng, 5000, 0.0, 1.0);
  const SampleCloud q = gaussian_cloud(rng, 5000, 1.0, 1.0);
  EXPECT_NEAR(kl_divergence_knn(p, q), 0.5, 0.1);
}

TEST(KnnKl, WiderGaussian) {
  Rng rng(3);
  const SampleCloud p = gaussian_cloud(rng, 5000, 0.0, 1.0);
  const SampleCloud q = gaussian_cloud(rng, 5000, 0.0, 2.0);
  // log(s_q / s_p) + s_p^2 / (2 s_q^2) - 1/2
  const double exact = std::log(2.0) + 1.0 / 8.0 - 0.5;
  EXPECT_NEAR(kl_divergence_knn(p, q), exact, 0.1);
}

TEST(KnnKl, TwoDimensionalShift) {
  Rng rng(4);
  SampleCloud p{2, {}}, q{2, {}};
  for (int i = 0; i < 5000; ++i) {
    p.points.push_back(rng.normal());
    p.points.push_back(rng.normal());
    q.points.push_back(rng.normal(1.0, 1.0));
    q.points.push_back(rng.normal());
  }
  EXPECT_NEAR(kl_divergence_knn(p, q), 0.5, 0.1);
  EXPECT_NEAR(kl_divergence_knn(p, q, 5), 0.5, 0.1);
}

TEST(KnnKl, PermutationInvariant) {
  Rng rng(5);
  SampleCloud p = gaussian_cloud(rng, 500, 0.0, 1.0);
  SampleCloud q = gaussian_cloud(rng, 700, 0.5, 1.5);
  const double a = kl_divergence_knn(p, q, 3);
  std::reverse(p.points.begin(), p.points.end());
  std::rotate(q.points.begin(), q.points.begin() + 123, q.points.end());
  EXPECT_NEAR(kl_divergence_knn(p, q, 3), a, 1e-12);
}

TEST(KnnKl, DuplicatesAreJitteredAndErrorsRaised) {
  SampleCloud p{1, {0.0, 0.0, 1.0, 2.0, 3.0}};
  SampleCloud q{1, {0.5, 1.5, 2.5}};
  KlDiagnostics diag;
  const double v = kl_divergence_knn(p, q, 1, &diag);
  EXPECT_TRUE(std::isfinite(v));
  EXPECT_EQ(diag.jittered, 2u);
  EXPECT_THROW(kl_divergence_knn(p, SampleCloud{2, {0, 0, 1, 1}}), InvalidArgument);
  EXPECT_THROW(kl_divergence_knn(p, q, 5), InvalidArgument);
}

Trajectory static_trajectory(const Field& u, int snapshots) {
  Trajectory t;
  t.grid = u.grid();
  for (int n = 0; n < snapshots; ++n) t.push_back(n, u);
  return t;
}

TEST(Acf, SpatialAcfOfSineIsCosine) {
  const Field u = test::sample(Grid::line(64, 1.0), [](double x, double) { return std::sin(2 * pi * x); });
  const std::vector<double> c = acf(static_trajectory(u, 3), AcfAxis::kSpatial, 20);
  ASSERT_EQ(c.size(), 21u);
  EXPECT_EQ(c[0], 1.0);
  for (int l = 0; l <= 20; ++l) EXPECT_NEAR(c[std::size_t(l)], std::cos(2 * pi * l / 64.0), 1e-10);
  EXPECT_EQ(first_zero_crossing(c), 16u);
}

TEST(Acf, WhiteNoiseInTimeIsUncorrelated) {
  Rng rng(6);
  const Grid g = Grid::line(8, 1.0);
  Trajectory t;
  t.grid = g;
  const int T = 2000;
  for (int n = 0; n < T; ++n) t.push_back(n, test::random_field(g, rng));
  const std::vector<double> c = acf(t, AcfAxis::kTemporal, 30);
  EXPECT_NEAR(c[0], 1.0, 1e-15);
  for (std::size_t l = 1; l < c.size(); ++l) {
    EXPECT_LT(std::abs(c[l]), 3.0 / std::sqrt(double(T)));
    EXPECT_LE(std::abs(c[l]), 1.0 + 1e-12);
  }
}

TEST(Acf, ZeroVarianceThrows) {
  const Field u = test::sample(Grid::line(8, 1.0), [](double x, double) { return x; });
  EXPECT_THROW(acf(static_trajectory(u, 10), AcfAxis::kTemporal, 3), NumericError);
  EXPECT_THROW(acf(static_trajectory(Field(Grid::line(8, 1.0)), 10), AcfAxis::kSpatial, 3), NumericError);
}

TEST(Moments, TwoPointDistribution) {
  std::vector<double> s;
  for (int i = 0; i < 50; ++i) {
    s.push_back(-1.0);
    s.push_back(1.0);
  }
  const Moments m = moments(s);
  EXPECT_NEAR(m.mean, 0.0, 1e-15);
  EXPECT_NEAR(m.variance, 1.0, 1e-15);
  EXPECT_NEAR(m.skewness, 0.0, 1e-15);
  EXPECT_NEAR(m.excess_kurtosis, -2.0, 1e-14);
}

TEST(Moments, GaussianSample) {
  Rng rng(8);
  std::vector<double> s(1000000);
  for (double& v : s) v = rng.normal(2.0, 3.0);
  const Moments m = moments(s);
  EXPECT_NEAR(m.mean, 2.0, 0.02);
  EXPECT_NEAR(m.variance, 9.0, 0.05);
  EXPECT_NEAR(m.excess_kurtosis, 0.0, 0.02);
}

TEST(Moments, Errors) {
  EXPECT_THROW(moments(std::vector<double>(10, 1.5)), NumericError);
  EXPECT_THROW(moments(std::vector<double>{1.0, 2.0, 3.0}), InvalidArgument);
}

TEST(HistogramTest, UniformDensity) {
  Rng rng(9);
  SampleCloud s;
  for (int i = 0; i < 100000; ++i) s.points.push_back(rng.uniform());
  const std::vector<int> bins{10};
  const std::vector<double> lo{0.0}, hi{1.0};
  const Histogram h = histogram(s, bins, lo, hi);
  ASSERT_EQ(h.density.size(), 10u);
  for (double d : h.density) EXPECT_NEAR(d, 1.0, 0.1);
}

TEST(HistogramTest, SingleBinAndConcentratedMass) {
  SampleCloud s{1, {0.1, 0.2, 0.3, 0.35}};
  const std::vector<double> lo{0.0}, hi{4.0};
  EXPECT_NEAR(histogram(s, std::vector<int>{1}, lo, hi).density[0], 0.25, 1e-15);
  const Histogram h = histogram(s, std::vector<int>{4}, lo, hi);
  EXPECT_NEAR(h.density[0], 1.0, 1e-15);
  for (std::size_t b = 1; b < 4; ++b) EXPECT_EQ(h.density[b], 0.0);
  EXPECT_THROW(histogram(SampleCloud{}, std::vector<int>{4}, lo, hi), InvalidArgument);
}

TEST(HistogramTest, JointDensityIntegratesToOne) {
  Rng rng(10);
  SampleCloud s{2, {}};
  for (int i = 0; i < 5000; ++i) {
    s.points.push_back(rng.normal());
    s.points.push_back(rng.normal());
  }
  const std::vector<int> bins{8, 6};
  const std::vector<double> lo{-6.0, -6.0}, hi{6.0, 6.0};
  const Histogram h = histogram(s, bins, lo, hi);
  ASSERT_EQ(h.density.size(), 48u);
  double integral = 0.0;
  for (double d : h.density) integral += d * (12.0 / 8) * (12.0 / 6);
  EXPECT_NEAR(integral, 1.0, 1e-12);
}

TEST(DerivativeSamples, ShapesAndValues) {
  const Grid g = Grid::line(32, 1.0);
  const Field u = test::sample(g, [](double x, double) { return std::sin(2 * pi * x); });
  const Trajectory t = static_trajectory(u, 3);
  const SampleCloud s0 = derivative_samples(t, 0);
  ASSERT_EQ(s0.size(), 96u);
  EXPECT_EQ(s0.points[40], u[8]);
  const SampleCloud s2 = derivative_samples(t, 2);
  EXPECT_NEAR(s2.points[8], -4 * pi * pi, 1e-10);
  const SampleCloud j = joint_derivative_samples(t);
  EXPECT_EQ(j.dim, 2);
  ASSERT_EQ(j.size(), 96u);
  EXPECT_NEAR(j.points[0], 2 * pi, 1e-10);
  EXPECT_NEAR(j.points[1], 0.0, 1e-10);
}

}  // namespace
}  // namespace ndop
