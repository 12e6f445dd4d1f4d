#include <benchmark/benchmark.h>

#include <memory>

#include "ndop/eki.hpp"
#include "ndop/fno.hpp"
#include "ndop/odeint.hpp"
#include "ndop/pde.hpp"
#include "ndop/stats.hpp"

namespace {

using namespace ndop;

FnoSpec burgers_spec() {
  FnoSpec s;
  s.width = 16;
  s.k_max = {12, 12};
  s.n_layers = 4;
  s.projection_width = 32;
  return s;
}

Field smooth_state(const Grid& g, std::uint64_t seed) {
  GrfSpec grf;
  grf.grid = g;
  Rng rng(seed);
  return sample_grf(grf, rng);
}

void BM_FftRoundTrip(benchmark::State& state) {
  const Field u = smooth_state(Grid::line(static_cast<int>(state.range(0)), 1.0), 1);
  for (auto _ : state) benchmark::DoNotOptimize(fft_inverse(fft_forward(u)));
}
BENCHMARK(BM_FftRoundTrip)->Arg(64)->Arg(512)->Arg(4096);

void BM_FnoForward(benchmark::State& state) {
  Rng rng(2);
  const FnoParams p = fno_init(burgers_spec(), rng);
  const Field u = smooth_state(Grid::line(static_cast<int>(state.range(0)), 1.0), 3);
  for (auto _ : state) benchmark::DoNotOptimize(fno_forward(p, u));
}
BENCHMARK(BM_FnoForward)->Arg(64)->Arg(256);

void BM_FnoVjp(benchmark::State& state) {
  Rng rng(2);
  const FnoParams p = fno_init(burgers_spec(), rng);
  const Field u = smooth_state(Grid::line(static_cast<int>(state.range(0)), 1.0), 3);
  for (auto _ : state) benchmark::DoNotOptimize(fno_vjp(p, u, u));
}
BENCHMARK(BM_FnoVjp)->Arg(64)->Arg(256);

// Ten RK4 steps of the learned field with the reverse pass.
void BM_Rk4Backprop(benchmark::State& state) {
  Rng rng(2);
  const FnoField f(std::make_shared<const FnoParams>(fno_init(burgers_spec(), rng)));
  const Field u0 = smooth_state(Grid::line(64, 1.0), 4);
  const IntegrationPlan plan = IntegrationPlan::uniform(0.0, 0.05, 11, 0.05);
  const std::vector<Field> cot(11, u0);
  const auto mode = static_cast<GradientMode>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(integrate_with_grad(f, u0, plan, cot, mode));
}
BENCHMARK(BM_Rk4Backprop)
    ->Arg(static_cast<int>(GradientMode::kRecomputeStages))
    ->Arg(static_cast<int>(GradientMode::kStoreStages))
    ->Arg(static_cast<int>(GradientMode::kCheckpointed));

void BM_BurgersRhs(benchmark::State& state) {
  const Field u = smooth_state(Grid::line(static_cast<int>(state.range(0)), 1.0), 5);
  for (auto _ : state) benchmark::DoNotOptimize(burgers_rhs(u, 1e-3));
}
BENCHMARK(BM_BurgersRhs)->Arg(512)->Arg(1024);

void BM_KseRhs(benchmark::State& state) {
  const Field u = kse_initial_condition(Grid::line(64, 22.0));
  for (auto _ : state) benchmark::DoNotOptimize(kse_rhs(u));
}
BENCHMARK(BM_KseRhs);

void BM_KnnKl(benchmark::State& state) {
  Rng rng(6);
  SampleCloud p{1, {}}, q{1, {}};
  for (int i = 0; i < state.range(0); ++i) {
    p.points.push_back(rng.normal());
    q.points.push_back(1.0 + rng.normal());
  }
  for (auto _ : state) benchmark::DoNotOptimize(kl_divergence_knn(p, q, 1));
}
BENCHMARK(BM_KnnKl)->Arg(5000)->Arg(20000);

void BM_EkiUpdate(benchmark::State& state) {
  const std::size_t p = 5000, J = static_cast<std::size_t>(state.range(0));
  Rng rng(7);
  EkiEnsemble e;
  e.y = {1.0};
  e.noise_cov = {0.01};
  std::vector<Observation> g;
  for (std::size_t j = 0; j < J; ++j) {
    ParamVector m(p);
    for (auto& v : m) v = rng.normal();
    e.members.push_back(std::move(m));
    g.push_back({rng.normal()});
  }
  for (auto _ : state) {
    Rng noise(8);
    benchmark::DoNotOptimize(eki_update(e, g, noise));
  }
}
BENCHMARK(BM_EkiUpdate)->Arg(50)->Arg(100);

}  // namespace

BENCHMARK_MAIN();
