#include <benchmark/benchmark.h>

#include "gpda/classifier.hpp"
#include "gpda/simulate.hpp"
#include "gpda/vi_engine.hpp"

namespace {

using namespace gpda;

struct SweepFixture {
  FunctionalDataset data;
  Hyperparams hyper;
  ModelState state;

  SweepFixture(Eigen::Index T, Eigen::Index n) {
    SimConfig cfg;
    cfg.setting = 2;
    cfg.T = T;
    cfg.n = n;
    cfg.signal_fraction = 0.05;
    cfg.signal_strength = 2.0;
    cfg.seed = 17;
    auto [d, truth] = generate_dataset(cfg);
    data = std::move(d);
    hyper = Hyperparams{}.resolved_for(data.grid);
    FitOptions opts;
    state = initialize_state(data, hyper, opts);
  }

  void sweep(int threads) {
    const SvbOptions svb{10, 1e-6, 1.0, 30};
    update_latent_fields(state, data, hyper, threads);
    update_mean_functions(state, data, hyper);
    update_mean_scales(state, hyper);
    for (int k : kAllSlots) svb_update_mean_lengthscale(state, hyper, k, svb);
    update_noise_variances(state, data, hyper);
    update_selection(state, data, hyper);
    update_latent_scale(state, hyper);
    svb_update_common_lengthscale(state, hyper, svb);
    map_update_perturbations(state, hyper, threads);
    map_update_common_hyper(state, hyper);
    map_update_mean_ls_hyper(state, hyper);
    map_update_ising_step(state, hyper);
  }
};

void BM_full_sweep(benchmark::State& bench) {
  SweepFixture fixture(bench.range(0), 50);
  const int threads = static_cast<int>(bench.range(1));
  for (auto _ : bench) {
    fixture.sweep(threads);
  }
  bench.SetComplexityN(bench.range(0));
}

void BM_predict(benchmark::State& bench) {
  SweepFixture fixture(bench.range(0), 40);
  for (int s = 0; s < 3; ++s) fixture.sweep(1);
  const Eigen::VectorXd x = fixture.data.X.row(0).transpose();
  for (auto _ : bench) {
    benchmark::DoNotOptimize(predict(x, fixture.state, fixture.hyper));
  }
  bench.SetComplexityN(bench.range(0));
}

}  // namespace

BENCHMARK(BM_full_sweep)
    ->ArgsProduct({{2000, 5000, 10000, 20000}, {1, 4}})
    ->Unit(benchmark::kMillisecond)
    ->Complexity();
BENCHMARK(BM_predict)
    ->Arg(2000)->Arg(5000)->Arg(10000)
    ->Unit(benchmark::kMillisecond)
    ->Complexity();

BENCHMARK_MAIN();
