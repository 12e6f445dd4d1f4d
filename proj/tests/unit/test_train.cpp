#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "ndop/error.hpp"
#include "ndop/pde.hpp"
#include "ndop/train.hpp"
#include "test_util.hpp"

namespace ndop {
namespace {

using test::kTrueA;
using test::linear_data;
using test::linear_factory;
using test::LinearField;

Trajectory two_snapshots(std::vector<double> a, std::vector<double> b) {
  Trajectory t;
  t.grid = Grid::line(4, 1.0);
  t.push_back(0.0, Field(t.grid, std::move(a)));
  t.push_back(0.5, Field(t.grid, std::move(b)));
  return t;
}

TEST(TrajectoryLoss, IdenticalIsZero) {
  const Trajectory t = two_snapshots({1, 2, 3, 4}, {5, 6, 7, 8});
  const LossPair l = trajectory_loss(t, t);
  EXPECT_EQ(l.absolute, 0.0);
  EXPECT_EQ(l.relative, 0.0);
}

TEST(TrajectoryLoss, DoubledPredictionHasUnitRelativeError) {
  const Trajectory t = two_snapshots({1, -2, 3, 0.5}, {0.1, 6, -7, 8});
  Trajectory p = t;
  for (auto& s : p.states) s *= 2.0;
  EXPECT_DOUBLE_EQ(trajectory_loss(t, p).relative, 1.0);
}

TEST(TrajectoryLoss, HandComputedCase) {
  const Trajectory truth = two_snapshots({1, 2, 0, 0}, {3, 4, 0, 0});
  const Trajectory pred = two_snapshots({1, 1, 0, 0}, {3, 6, 0, 0});
  // Squared errors 0, 1, 0, 0 and 0, 4, 0, 0; norms sqrt(5) and 5.
  const LossPair all = trajectory_loss(truth, pred);
  EXPECT_DOUBLE_EQ(all.absolute, 5.0 / 8.0);
  EXPECT_DOUBLE_EQ(all.relative, (1.0 / std::sqrt(5.0) + 2.0 / 5.0) / 2.0);
  const LossPair tail = trajectory_loss(truth, pred, 1);
  EXPECT_DOUBLE_EQ(tail.absolute, 1.0);
  EXPECT_DOUBLE_EQ(tail.relative, 0.4);
}

TEST(TrajectoryLoss, ShapeMismatch) {
  const Trajectory t = two_snapshots({1, 2, 3, 4}, {5, 6, 7, 8});
  Trajectory shorter = t.slice(0, 1);
  EXPECT_THROW(trajectory_loss(t, shorter), ShapeError);
  Trajectory shifted = t;
  shifted.times[1] = 0.6;
  EXPECT_THROW(trajectory_loss(t, shifted), ShapeError);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  std::vector<double> p{1.0, -2.0, 3.0};
  AdamState s(3);
  adam_step(s, p, std::vector<double>(3, 0.0), 0.1);
  EXPECT_EQ(p, (std::vector<double>{1.0, -2.0, 3.0}));
}

TEST(Adam, FirstStepMovesByLearningRate) {
  std::vector<double> p{0.0, 0.0, 0.0};
  const std::vector<double> g{3.0, -0.5, 1e-3};
  AdamState s(3);
  adam_step(s, p, g, 0.01);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(p[i], -0.01 * g[i] / (std::abs(g[i]) + 1e-8), 1e-15);
}

TEST(Adam, TwoStepsFollowTheMomentRecursions) {
  std::vector<double> p{1.0};
  AdamState s(1);
  adam_step(s, p, std::vector<double>{2.0}, 0.1);
  adam_step(s, p, std::vector<double>{-1.0}, 0.1);
  const double m = 0.9 * (0.1 * 2.0) + 0.1 * -1.0;          // 0.08
  const double v = 0.999 * (0.001 * 4.0) + 0.001 * 1.0;     // 0.004996
  EXPECT_EQ(s.t, 2);
  EXPECT_NEAR(s.m[0], m, 1e-16);
  EXPECT_NEAR(s.v[0], v, 1e-16);
  const double step1 = 0.1 * 2.0 / (2.0 + 1e-8);
  const double mh = m / (1 - 0.81), vh = v / (1 - 0.999 * 0.999);
  EXPECT_NEAR(p[0], 1.0 - step1 - 0.1 * mh / (std::sqrt(vh) + 1e-8), 1e-14);
}

TEST(Adam, LargeGradientScaleInvariance) {
  std::vector<double> a{0.0}, b{0.0};
  AdamState sa(1), sb(1);
  adam_step(sa, a, std::vector<double>{1e3}, 1e-3);
  adam_step(sb, b, std::vector<double>{2e3}, 1e-3);
  EXPECT_LT(std::abs(a[0] - b[0]) / std::abs(a[0]), 0.01);
}

TEST(Adam, RejectsBadGradients) {
  std::vector<double> p{1.0, 2.0};
  AdamState s(2);
  EXPECT_THROW(adam_step(s, p, std::vector<double>{1.0, NAN}, 0.1), NumericError);
  EXPECT_THROW(adam_step(s, p, std::vector<double>{1.0}, 0.1), ShapeError);
}

TEST(CosineLr, KnownPoints) {
  EXPECT_EQ(cosine_lr(1e-3, 0, 1000), 1e-3);
  EXPECT_NEAR(cosine_lr(1e-3, 500, 1000), 5e-4, 1e-18);
  // 1e-3 * sin^2(pi / 2000)
  EXPECT_NEAR(cosine_lr(1e-3, 999, 1000), 2.4674000e-9, 1e-14);
}

TEST(CosineLr, NonIncreasing) {
  for (int e = 1; e < 300; ++e) EXPECT_LE(cosine_lr(0.1, e, 300), cosine_lr(0.1, e - 1, 300));
}

TEST(TrainShortTerm, ZeroEpochsReturnsInitialParameters) {
  SgdConfig cfg;
  cfg.epochs = 0;
  const ParamVector p0(16, 0.3);
  const TrainResult r = train_short_term(linear_factory(), p0, {}, cfg);
  EXPECT_EQ(r.params, p0);
  EXPECT_TRUE(r.history.empty());
}

TEST(TrainShortTerm, RecoversLinearSystem) {
  SgdConfig cfg;
  cfg.epochs = 3000;
  cfg.batch = 10;
  cfg.lr0 = 0.02;
  cfg.dt_internal = 0.025;
  cfg.seed = 1;
  const TrainResult r = train_short_term(linear_factory(), ParamVector(16, 0.0), linear_data(), cfg);
  ASSERT_FALSE(r.failure);
  ASSERT_EQ(r.history.size(), 3000u);
  double worst = 0.0;
  for (std::size_t i = 0; i < 16; ++i) worst = std::max(worst, std::abs(r.params[i] - kTrueA[i]));
  EXPECT_LT(worst, 1e-3);
}

TEST(TrainShortTerm, DeterministicAndResumable) {
  SgdConfig cfg;
  cfg.epochs = 40;
  cfg.batch = 3;
  cfg.lr0 = 0.05;
  cfg.horizon = 0.5;
  cfg.dt_internal = 0.05;
  cfg.seed = 9;
  const auto data = linear_data();
  ParamVector mid_params;
  AdamState mid_adam;
  const TrainResult a = train_short_term(linear_factory(), ParamVector(16, 0.0), data, cfg, std::nullopt,
                                         [&](const LossRecord& rec, const ParamVector& p, const AdamState& s) {
                                           if (rec.epoch == 19) {
                                             mid_params = p;
                                             mid_adam = s;
                                           }
                                         });
  const TrainResult b = train_short_term(linear_factory(), ParamVector(16, 0.0), data, cfg);
  ASSERT_EQ(a.history.size(), b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    EXPECT_EQ(a.history[i].absolute, b.history[i].absolute);
    EXPECT_EQ(a.history[i].lr, b.history[i].lr);
  }
  EXPECT_EQ(a.params, b.params);

  const TrainResult c = train_short_term(linear_factory(), mid_params, data, cfg, TrainResume{20, mid_adam});
  ASSERT_EQ(c.history.size(), 20u);
  EXPECT_EQ(c.history.front().epoch, 20);
  for (std::size_t i = 0; i < 20; ++i) EXPECT_EQ(c.history[i].absolute, a.history[20 + i].absolute);
  EXPECT_EQ(c.params, a.params);
}

TEST(TrainShortTerm, BlowUpIsRecorded) {
  SgdConfig cfg;
  cfg.epochs = 5;
  cfg.batch = 2;
  cfg.dt_internal = 0.05;
  cfg.blowup_bound = 10.0;
  const TrainResult r = train_short_term(linear_factory(), ParamVector(16, 5.0), linear_data(), cfg);
  ASSERT_TRUE(r.failure);
  EXPECT_NE(r.failure->find("epoch 0"), std::string::npos);
  EXPECT_EQ(r.params, ParamVector(16, 5.0));
}

TEST(TrainShortTerm, BurgersLossDecreasesEarly) {
  DatasetSpec spec;
  spec.grid = Grid::line(128, 1.0);
  spec.dt_solver = 1e-3;
  spec.dt_obs = 0.05;
  spec.t_final = 0.5;
  spec.n_train = 10;
  spec.space_stride = 2;
  const Dataset ds = generate_dataset(spec, Rng(2));
  FnoSpec fs;
  fs.width = 16;
  fs.k_max = {12, 12};
  fs.projection_width = 32;
  Rng rng(1);
  SgdConfig cfg;
  // The first 50 epochs of a long run, where the cosine schedule is still ~lr0.
  cfg.epochs = 50;
  cfg.batch = 10;
  cfg.schedule = LrSchedule::kConstant;
  cfg.dt_internal = 0.025;
  const TrainResult r = train_short_term(fno_init(fs, rng), ds.train, cfg);
  ASSERT_FALSE(r.failure);
  std::vector<double> block(5, 0.0);
  for (std::size_t e = 0; e < 50; ++e) block[e / 10] += r.history[e].absolute / 10.0;
  for (std::size_t b = 1; b < 5; ++b) EXPECT_LT(block[b], block[b - 1]) << "block " << b;
}

TEST(Predict, StartsFromFirstSnapshotAtObservationTimes) {
  const auto data = linear_data();
  const LinearField truth(kTrueA);
  const Trajectory p = predict(truth, data[0], 0.025);
  ASSERT_EQ(p.size(), data[0].size());
  EXPECT_EQ(p.times, data[0].times);
  for (std::size_t n = 0; n < p.size(); ++n) EXPECT_EQ(test::max_abs_diff(p.states[n], data[0].states[n]), 0.0);
  EXPECT_DOUBLE_EQ(resolve_dt(data[0], 0.0), 0.025);
  const LossPair l = evaluate_short_term(truth, data, 0.3, 0.025);
  EXPECT_EQ(l.absolute, 0.0);
}

}  // namespace
}  // namespace ndop
