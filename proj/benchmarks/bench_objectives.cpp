#include <benchmark/benchmark.h>

#include "upliftrank/barrier.hpp"
#include "upliftrank/drm.hpp"
#include "upliftrank/eval.hpp"
#include "upliftrank/ingest.hpp"
#include "upliftrank/nn.hpp"
#include "upliftrank/rlearner.hpp"

using namespace uplift;

namespace {

Dataset make_dataset(Eigen::Index n, int d) {
  auto cfg = ingest::SyntheticConfig::defaults(n, d);
  cfg.noise_sd = 0.3;
  return ingest::generate_synthetic(cfg, RngSeed{1}).first;
}

void BM_Forward(benchmark::State& state) {
  const auto n = static_cast<Eigen::Index>(state.range(0));
  const Dataset ds = make_dataset(n, 20);
  const auto params = nn::init_params({20, 1}, RngSeed{2});
  for (auto _ : state) {
    benchmark::DoNotOptimize(nn::forward(params, ds.x()));
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_Forward)->Arg(1000)->Arg(10000)->Arg(100000);

void BM_DrmValueAndGradient(benchmark::State& state) {
  const auto n = static_cast<Eigen::Index>(state.range(0));
  const Dataset ds = make_dataset(n, 20);
  const auto params = nn::init_params({20, 1}, RngSeed{2});
  const drm::DrmObjective obj(ds, {});
  for (auto _ : state) {
    benchmark::DoNotOptimize(nn::value_and_gradient(params, ds.x(), obj));
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_DrmValueAndGradient)->Arg(1000)->Arg(10000)->Arg(100000);

void BM_EffectivenessProbs(benchmark::State& state) {
  const auto n = static_cast<Eigen::Index>(state.range(0));
  const Dataset ds = make_dataset(n, 4);
  const auto params = nn::init_params({4, 1}, RngSeed{3});
  const VectorXd scores = nn::forward(params, ds.x());
  for (auto _ : state) {
    benchmark::DoNotOptimize(drm::effectiveness_probs(scores, ds.t()));
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_EffectivenessProbs)->Arg(10000)->Arg(100000);

void BM_ConstrainedObjective(benchmark::State& state) {
  const auto n = static_cast<Eigen::Index>(state.range(0));
  const Dataset ds = make_dataset(n, 20);
  const auto params = nn::init_params({20, 1}, RngSeed{4});
  barrier::ConstrainedObjective obj(
      ds, barrier::Constraint::make_percentage(0.4));
  obj.set_temperature(2.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(nn::value_and_gradient(params, ds.x(), obj));
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_ConstrainedObjective)->Arg(1000)->Arg(10000)->Arg(100000);

void BM_DualitySolve(benchmark::State& state) {
  const auto n = static_cast<Eigen::Index>(state.range(0));
  Rng rng(RngSeed{5});
  VectorXd tau_r(n), tau_c(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    tau_r[i] = rng.normal();
    tau_c[i] = rng.uniform(0.05, 2.0);
  }
  const double budget = 0.1 * static_cast<double>(n);
  for (auto _ : state) {
    benchmark::DoNotOptimize(rlearner::duality_solve(tau_r, tau_c, budget));
  }
}
BENCHMARK(BM_DualitySolve)->Arg(1000)->Arg(10000);

void BM_CostCurve(benchmark::State& state) {
  const auto n = static_cast<Eigen::Index>(state.range(0));
  const Dataset ds = make_dataset(n, 4);
  Rng rng(RngSeed{6});
  VectorXd scores(n);
  for (Eigen::Index i = 0; i < n; ++i) scores[i] = rng.normal();
  for (auto _ : state) {
    benchmark::DoNotOptimize(eval::cost_curve(scores, ds));
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_CostCurve)->Arg(10000)->Arg(100000);

void BM_FitRidge(benchmark::State& state) {
  const auto n = static_cast<Eigen::Index>(state.range(0));
  const Dataset ds = make_dataset(n, 20);
  for (auto _ : state) {
    benchmark::DoNotOptimize(rlearner::fit_ridge(ds.x(), ds.y_r(), 1e-8));
  }
}
BENCHMARK(BM_FitRidge)->Arg(10000)->Arg(100000);

}  // namespace

BENCHMARK_MAIN();
