#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "ndop/eki.hpp"
#include "ndop/error.hpp"
#include "ndop/hybrid.hpp"
#include "ndop/pde.hpp"
#include "ndop/stats.hpp"
#include "test_util.hpp"

namespace ndop {
namespace {

EkiEnsemble ensemble(std::vector<ParamVector> members, Observation y, std::vector<double> cov) {
  return EkiEnsemble{std::move(members), std::move(y), std::move(cov)};
}

TEST(EkiUpdate, IdenticalMembersAreUnchanged) {
  const EkiEnsemble e = ensemble({{1.0, 2.0}, {1.0, 2.0}, {1.0, 2.0}}, {3.0}, {0.01});
  Rng rng(1);
  const EkiEnsemble out = eki_update(e, {{5.0}, {5.0}, {5.0}}, rng);
  EXPECT_EQ(out.members, e.members);
}

TEST(EkiUpdate, ScalarTwoMemberHandComputed) {
  // G(theta) = 2 theta, y = 4, Sigma = 0.01, members {0, 1}:
  // C_tg = 1, C_gg = 2, gain 1 / 2.01, y_j = 4 + 0.1 xi_j.
  const EkiEnsemble e = ensemble({{0.0}, {1.0}}, {4.0}, {0.01});
  Rng rng(3), replay(3);
  const EkiEnsemble out = eki_update(e, {{0.0}, {2.0}}, rng);
  const double xi0 = replay.normal(), xi1 = replay.normal();
  EXPECT_NEAR(out.members[0][0], 0.0 + (4.0 + 0.1 * xi0 - 0.0) / 2.01, 1e-14);
  EXPECT_NEAR(out.members[1][0], 1.0 + (4.0 + 0.1 * xi1 - 2.0) / 2.01, 1e-14);
}

TEST(EkiUpdate, RejectsBadInput) {
  const EkiEnsemble e = ensemble({{0.0}, {1.0}}, {4.0}, {0.01});
  Rng rng(0);
  EXPECT_THROW(eki_update(e, {{0.0}, {NAN}}, rng), NumericError);
  EXPECT_THROW(eki_update(e, {{0.0}}, rng), ShapeError);
  EXPECT_THROW(eki_update(ensemble({{0.0}}, {4.0}, {0.01}), {{0.0}}, rng), InvalidArgument);
}

TEST(EkiUpdate, MembersStayInInitialAffineSpan) {
  // p = 6 parameters, J = 3 members: the span has dimension 2.
  Rng rng(5);
  std::vector<ParamVector> members(3, ParamVector(6));
  for (auto& m : members)
    for (double& v : m) v = rng.normal();
  auto G = [](const ParamVector& t) { return Observation{t[0] + 2 * t[3], t[1] - t[5]}; };
  std::vector<Observation> g;
  for (const auto& m : members) g.push_back(G(m));
  const EkiEnsemble out = eki_update(ensemble(members, {1.0, -1.0}, {0.01, 0.02}), g, rng);

  // Orthonormal basis of the initial deviations by Gram-Schmidt.
  ParamVector mean(6, 0.0);
  for (const auto& m : members)
    for (std::size_t i = 0; i < 6; ++i) mean[i] += m[i] / 3.0;
  std::vector<ParamVector> basis;
  for (std::size_t j = 0; j < 2; ++j) {
    ParamVector v(6);
    for (std::size_t i = 0; i < 6; ++i) v[i] = members[j][i] - mean[i];
    for (const auto& b : basis) {
      double d = 0.0;
      for (std::size_t i = 0; i < 6; ++i) d += v[i] * b[i];
      for (std::size_t i = 0; i < 6; ++i) v[i] -= d * b[i];
    }
    double n = 0.0;
    for (double x : v) n += x * x;
    for (double& x : v) x /= std::sqrt(n);
    basis.push_back(v);
  }
  for (const auto& m : out.members) {
    ParamVector r(6);
    for (std::size_t i = 0; i < 6; ++i) r[i] = m[i] - mean[i];
    for (const auto& b : basis) {
      double d = 0.0;
      for (std::size_t i = 0; i < 6; ++i) d += r[i] * b[i];
      for (std::size_t i = 0; i < 6; ++i) r[i] -= d * b[i];
    }
    double res = 0.0;
    for (double x : r) res = std::max(res, std::abs(x));
    EXPECT_LT(res, 1e-10);
  }
}

// G(theta) = A theta with A = [[1, 0.5], [0.2, 1.5]].
Observation linear_map(const ParamVector& t) { return {t[0] + 0.5 * t[1], 0.2 * t[0] + 1.5 * t[1]}; }

TEST(RunEki, OneStepMeanMatchesTikhonovSolution) {
  // Prior N(0, I), noise 0.01 I: the exact update of the mean is
  // argmin |y - A t|^2 / 0.01 + |t|^2, i.e. (A^T A / 0.01 + I) t = A^T y / 0.01.
  const double a = 1.0, b = 0.5, c = 0.2, d = 1.5;
  const Observation y{1.0, 2.0};
  const double m00 = (a * a + c * c) / 0.01 + 1, m01 = (a * b + c * d) / 0.01, m11 = (b * b + d * d) / 0.01 + 1;
  const double r0 = (a * y[0] + c * y[1]) / 0.01, r1 = (b * y[0] + d * y[1]) / 0.01;
  const double det = m00 * m11 - m01 * m01;
  const double t0 = (m11 * r0 - m01 * r1) / det, t1 = (m00 * r1 - m01 * r0) / det;

  EkiConfig cfg;
  cfg.ensemble_size = 1000;
  cfg.iterations = 1;
  cfg.noise_cov = {0.01, 0.01};
  cfg.spread = 1.0;
  cfg.seed = 11;
  const EkiRun run = run_eki(FunctionForwardMap(linear_map, 2), {0.0, 0.0}, y, cfg);
  ASSERT_EQ(run.iterates.size(), 2u);
  const ParamVector& m = run.iterates[1].mean;
  const double err = std::hypot(m[0] - t0, m[1] - t1) / std::hypot(t0, t1);
  EXPECT_LT(err, 0.05);
}

TEST(RunEki, LinearMisfitDecreases) {
  EkiConfig cfg;
  cfg.ensemble_size = 50;
  cfg.iterations = 5;
  cfg.noise_cov = {0.01, 0.01};
  cfg.spread = 1.0;
  cfg.seed = 2;
  const EkiRun run = run_eki(FunctionForwardMap(linear_map, 2), {3.0, -2.0}, {1.0, 2.0}, cfg);
  ASSERT_EQ(run.iterates.size(), 6u);
  for (std::size_t i = 1; i < run.iterates.size(); ++i) EXPECT_LE(run.iterates[i].misfit, run.iterates[i - 1].misfit);
}

TEST(RunEki, ZeroIterationsAndZeroSpread) {
  EkiConfig cfg;
  cfg.ensemble_size = 4;
  cfg.iterations = 0;
  cfg.noise_cov = {0.01, 0.01};
  const FunctionForwardMap G(linear_map, 2);
  const EkiRun none = run_eki(G, {1.0, 1.0}, {0.0, 0.0}, cfg);
  ASSERT_EQ(none.iterates.size(), 1u);
  EXPECT_EQ(none.final_members.size(), 4u);
  EXPECT_NE(none.final_members[0], none.final_members[1]);

  cfg.iterations = 3;
  cfg.spread = 0.0;
  const EkiRun flat = run_eki(G, {1.0, 1.0}, {0.0, 0.0}, cfg);
  for (const auto& m : flat.final_members) EXPECT_EQ(m, (ParamVector{1.0, 1.0}));
}

TEST(RunEki, ConfigValidation) {
  EkiConfig cfg;
  cfg.ensemble_size = 1;
  EXPECT_THROW(cfg.validate(1), InvalidArgument);
  cfg.ensemble_size = 2;
  cfg.noise_cov = {-1.0};
  EXPECT_THROW(cfg.validate(1), InvalidArgument);
  cfg.noise_cov = {1.0, 0.5, 0.4, 1.0};
  EXPECT_THROW(cfg.validate(2), InvalidArgument);
  cfg.noise_cov = {1.0, 0.5, 0.5, 1.0};
  EXPECT_NO_THROW(cfg.validate(2));
}

TEST(KurtosisMap, GaussianWhiteFieldHasZeroExcessKurtosis) {
  const Grid g = Grid::line(1024, 1.0);
  Rng rng(7);
  Trajectory t;
  t.grid = g;
  for (int n = 0; n < 100; ++n) t.push_back(n, test::random_field(g, rng));
  EXPECT_NEAR(uxx_kurtosis(t), 0.0, 0.1);
}

TEST(KurtosisMap, ConstantInTimeMatchesSingleProfile) {
  const Grid g = Grid::line(64, 22.0);
  const Field u = kse_initial_condition(g);
  Trajectory t;
  t.grid = g;
  for (int n = 0; n < 5; ++n) t.push_back(n, u);
  const Field uxx = spectral_derivative(u, 2);
  const Moments m = moments(uxx.values());
  EXPECT_NEAR(uxx_kurtosis(t), m.excess_kurtosis, 1e-12);
}

FnoSpec tiny_fno() {
  FnoSpec s;
  s.width = 4;
  s.k_max = {4, 4};
  s.n_layers = 1;
  s.projection_width = 0;
  return s;
}

TEST(KurtosisMap, BlowUpReturnsSentinel) {
  KurtosisMapSpec spec;
  spec.spec = tiny_fno();
  spec.u0 = kse_initial_condition(Grid::line(32, 22.0));
  spec.t_long = 20.0;
  spec.dt_obs = 1.0;
  spec.dt = 0.25;
  spec.bound = 1e3;
  spec.sentinel = blowup_sentinel(0.5, 0.01);
  EXPECT_DOUBLE_EQ(spec.sentinel, 100.5);
  const KurtosisForwardMap fmap(spec);
  const ParamVector wild(fno_parameter_count(spec.spec), 3.0);
  EXPECT_THROW(fmap.simulate(wild), BlowUpError);
  EXPECT_EQ(fmap.evaluate(wild), Observation{100.5});
}

TEST(KurtosisMap, DeterministicAndMatchesSimulation) {
  KurtosisMapSpec spec;
  spec.spec = tiny_fno();
  spec.u0 = kse_initial_condition(Grid::line(32, 22.0));
  spec.t_long = 10.0;
  Rng rng(4);
  const ParamVector theta = fno_init(spec.spec, rng).values;
  const KurtosisForwardMap fmap(spec);
  const Observation a = fmap.evaluate(theta), b = fmap.evaluate(theta);
  EXPECT_EQ(a, b);
  const Trajectory t = fmap.simulate(theta);
  EXPECT_EQ(t.size(), 11u);
  EXPECT_EQ(a[0], uxx_kurtosis(t));
}

EkiRecord record(double short_err, double long_err) {
  EkiRecord r;
  r.short_error = short_err;
  r.long_error = long_err;
  return r;
}

TEST(SelectCheckpoint, ArgminWithConstraintAndTies) {
  EXPECT_THROW(select_checkpoint({}, 1.0), InvalidArgument);
  EXPECT_EQ(select_checkpoint({record(5.0, 5.0)}, 1.0), 0u);
  const std::vector<EkiRecord> h{record(0.1, 3.0), record(0.1, 1.0), record(0.5, 0.1), record(0.2, 1.0)};
  // Reference 0.1, rho 2: entry 2 (short 0.5) is infeasible.
  EXPECT_EQ(select_checkpoint(h, 0.1, 2.0), 1u);
  EXPECT_EQ(select_checkpoint(h, 0.1, 10.0), 2u);
  // Nothing feasible: smallest short error, earliest on ties.
  EXPECT_EQ(select_checkpoint(h, 0.01, 2.0), 0u);
}

// G(theta) = sum(theta) as a stand-in for the long-term statistic.
Observation param_sum(const ParamVector& t) {
  double s = 0.0;
  for (double v : t) s += v;
  return {s};
}

HybridConfig hybrid_config() {
  HybridConfig cfg;
  cfg.total_epochs = 12;
  cfg.eki_every = 5;
  cfg.sgd.lr0 = 0.01;
  cfg.sgd.batch = 3;
  cfg.sgd.dt_internal = 0.05;
  cfg.sgd.horizon = 0.5;
  cfg.sgd.seed = 4;
  cfg.eki.ensemble_size = 20;
  cfg.eki.iterations = 2;
  cfg.eki.spread = 0.01;
  cfg.eki.seed = 8;
  cfg.short_eval_windows = 3;
  return cfg;
}

TEST(HybridTrain, NoEkiEpochIsPlainSgd) {
  HybridConfig cfg = hybrid_config();
  cfg.eki_every = 100;
  const auto data = test::linear_data();
  const ParamVector p0(16, 0.0);
  const HybridResult h = hybrid_train(test::linear_factory(), p0, data, FunctionForwardMap(param_sum, 1), {-2.0}, cfg);
  SgdConfig sgd = cfg.sgd;
  sgd.epochs = cfg.total_epochs;
  const TrainResult t = train_short_term(test::linear_factory(), p0, data, sgd);
  EXPECT_EQ(h.params, t.params);
  EXPECT_TRUE(h.history.eki.empty());
  ASSERT_EQ(h.history.sgd.size(), 12u);
  for (std::size_t i = 0; i < 12; ++i) EXPECT_EQ(h.history.sgd[i].absolute, t.history[i].absolute);
}

TEST(HybridTrain, EpochScheduleAndDeterminism) {
  const HybridConfig cfg = hybrid_config();
  const auto data = test::linear_data();
  const FunctionForwardMap G(param_sum, 1);
  const HybridResult a = hybrid_train(test::linear_factory(), ParamVector(16, 0.0), data, G, {-2.0}, cfg);
  const HybridResult b = hybrid_train(test::linear_factory(), ParamVector(16, 0.0), data, G, {-2.0}, cfg);
  EXPECT_EQ(a.params, b.params);
  ASSERT_EQ(a.history.sgd.size(), 12u);
  // EKI epochs after SGD epochs 5 and 10, each with N_it + 1 recorded iterates.
  ASSERT_EQ(a.history.eki.size(), 6u);
  EXPECT_EQ(a.history.eki[0].epoch, 5);
  EXPECT_EQ(a.history.eki[3].epoch, 10);
  EXPECT_EQ(a.history.eki[5].eki_epoch, 2);
  EXPECT_EQ(a.history.eki[5].iteration, 2);
  for (std::size_t i = 0; i < a.history.eki.size(); ++i) {
    EXPECT_EQ(a.history.eki[i].mean, b.history.eki[i].mean);
    EXPECT_GT(a.history.eki[i].short_error, 0.0);
  }
  // The statistic is pulled towards the target.
  EXPECT_LT(a.history.eki[2].long_error, a.history.eki[0].long_error);
  EXPECT_TRUE(a.history.failures.empty());
}

TEST(HybridTrain, CallbackRunsOncePerEkiEpoch) {
  const HybridConfig cfg = hybrid_config();
  const auto data = test::linear_data();
  std::vector<std::pair<int, std::size_t>> calls;
  hybrid_train(test::linear_factory(), ParamVector(16, 0.0), data, FunctionForwardMap(param_sum, 1), {-2.0}, cfg,
               [&](int eki_epoch, const HybridHistory& h) { calls.emplace_back(eki_epoch, h.eki.size()); });
  ASSERT_EQ(calls.size(), 2u);
  EXPECT_EQ(calls[0], std::make_pair(1, std::size_t{3}));
  EXPECT_EQ(calls[1], std::make_pair(2, std::size_t{6}));
}

TEST(HybridTrain, ZeroIterationsResamplesAroundTheta) {
  HybridConfig cfg = hybrid_config();
  cfg.total_epochs = 5;
  cfg.eki.iterations = 0;
  cfg.eki.ensemble_size = 400;
  cfg.eki.spread = 0.1;
  const auto data = test::linear_data();
  const HybridResult h =
      hybrid_train(test::linear_factory(), ParamVector(16, 0.0), data, FunctionForwardMap(param_sum, 1), {0.0}, cfg);
  SgdConfig sgd = cfg.sgd;
  sgd.epochs = 5;
  const TrainResult t = train_short_term(test::linear_factory(), ParamVector(16, 0.0), data, sgd);
  ASSERT_EQ(h.history.eki.size(), 1u);
  // Ensemble mean = theta + Monte-Carlo noise of std spread / sqrt(J) = 0.005.
  for (std::size_t i = 0; i < 16; ++i) {
    EXPECT_NE(h.params[i], t.params[i]);
    EXPECT_NEAR(h.params[i], t.params[i], 0.025);
  }
}

TEST(HybridTrain, FailedEkiEpochKeepsTheta) {
  HybridConfig cfg = hybrid_config();
  cfg.total_epochs = 5;
  const FunctionForwardMap bad([](const ParamVector&) { return Observation{NAN}; }, 1);
  const auto data = test::linear_data();
  const HybridResult h = hybrid_train(test::linear_factory(), ParamVector(16, 0.0), data, bad, {0.0}, cfg);
  SgdConfig sgd = cfg.sgd;
  sgd.epochs = 5;
  const TrainResult t = train_short_term(test::linear_factory(), ParamVector(16, 0.0), data, sgd);
  ASSERT_EQ(h.history.failures.size(), 1u);
  EXPECT_EQ(h.params, t.params);
}

TEST(HybridConfigCheck, Validation) {
  HybridConfig cfg;
  cfg.eki_every = 0;
  EXPECT_THROW(cfg.validate(), InvalidArgument);
  cfg = HybridConfig();
  cfg.sgd.schedule = LrSchedule::kCosine;
  EXPECT_THROW(cfg.validate(), InvalidArgument);
}

}  // namespace
}  // namespace ndop
