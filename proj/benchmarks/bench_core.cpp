#include <benchmark/benchmark.h>

#include "banditstop/estimators.hpp"
#include "banditstop/inference.hpp"
#include "banditstop/model.hpp"
#include "banditstop/stopping.hpp"
#include "banditstop/trajectory.hpp"

using namespace banditstop;

namespace {

SimulationSetup setup_for(std::int64_t n, int d) {
  SimulationSetup s;
  s.context = ContextSpec::uniform_cube(d);
  s.model = TrueModel{Vector::Zero(d), Vector::Ones(d), 1.0, 1.0, NoiseKind::Gaussian};
  s.policy = EpsGreedy{Schedule::constant(0.2)};
  s.clip = ClipSchedule{Schedule::constant(0.1)};
  s.batch_size = n;
  s.sigma_mode = KnownSigma{1.0};
  return s;
}

void BM_FitBatchOls(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  Rng rng(1);
  const Matrix X = sample_batch_contexts(ContextSpec::uniform_cube(d), 500, rng);
  std::vector<int> a(500);
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = rng.bernoulli(0.5) ? 1 : 0;
  const Vector y = realize_rewards(TrueModel{Vector::Zero(d), Vector::Ones(d), 1, 1, NoiseKind::Gaussian}, X, a, rng);
  for (auto _ : state) benchmark::DoNotOptimize(fit_batch_ols(X, a, y));
}
BENCHMARK(BM_FitBatchOls)->Arg(2)->Arg(4)->Arg(8);

void BM_IvwAccumulate(benchmark::State& state) {
  Rng rng(2);
  const auto setup = setup_for(100, 4);
  const auto traj = simulate_trajectory(setup, StoppingRuleSpec{OnlineThreshold{1e-300}, 51}, rng,
                                        TrajectoryOptions{50, false, false});
  for (auto _ : state) {
    IvwAccumulator acc(4);
    for (const auto& f : traj.fits) acc.add(f);
    benchmark::DoNotOptimize(acc.estimate(KnownSigma{1.0}, 100));
  }
}
BENCHMARK(BM_IvwAccumulate);

void BM_SpectralNorm(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  Matrix A = Matrix::Random(d, d);
  const Matrix m = A * A.transpose();
  for (auto _ : state) benchmark::DoNotOptimize(spectral_norm(m));
}
BENCHMARK(BM_SpectralNorm)->Arg(2)->Arg(8);

void BM_Trajectory(benchmark::State& state) {
  const auto setup = setup_for(state.range(0), 2);
  const StoppingRuleSpec rule{OnlineThreshold{1e-300}, 21};
  std::uint64_t seed = 0;
  for (auto _ : state) {
    Rng rng(seed++);
    benchmark::DoNotOptimize(simulate_trajectory(setup, rule, rng, TrajectoryOptions{20, false, false}));
  }
  state.SetItemsProcessed(state.iterations() * 20 * state.range(0));
}
BENCHMARK(BM_Trajectory)->Arg(100)->Arg(1000);

void BM_ShortcutSampler(benchmark::State& state) {
  IvwEstimate est;
  for (auto& arm : est.arms) {
    arm.beta = Vector::Ones(3);
    arm.sigma_hat = Matrix::Identity(3, 3);
  }
  est.n = 100;
  ConditionalSamplerConfig cfg;
  cfg.n_samples = 4000;
  cfg.max_attempts = 4000;
  const auto setup = setup_for(100, 3);
  const StoppingRuleSpec rule{OnlineThreshold{1.0}, 100};
  for (auto _ : state) {
    Rng rng(3);
    benchmark::DoNotOptimize(sample_conditional(StoppedExperiment{5, est}, setup, rule, cfg, rng));
  }
}
BENCHMARK(BM_ShortcutSampler);

}  // namespace
