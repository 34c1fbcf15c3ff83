#include <benchmark/benchmark.h>

#include "gpda/banded.hpp"
#include "gpda/rng.hpp"

namespace {

gpda::SymTridiagonal random_spd(Eigen::Index T, std::uint64_t seed) {
  gpda::Rng rng(seed);
  gpda::BandedCholeskyFactor L;
  L.ldiag.resize(T);
  L.lsub.resize(T - 1);
  for (Eigen::Index j = 0; j < T; ++j) {
    L.ldiag[j] = 0.5 + 1.5 * rng.uniform01();
    if (j < T - 1) L.lsub[j] = 2.0 * rng.uniform01() - 1.0;
  }
  return L.reconstruct();
}

void BM_thomas_solve(benchmark::State& state) {
  const Eigen::Index T = state.range(0);
  const gpda::SymTridiagonal Q = random_spd(T, 1);
  Eigen::VectorXd b = Eigen::VectorXd::LinSpaced(T, -1.0, 1.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(gpda::thomas_solve(Q, b));
  }
  state.SetComplexityN(T);
}

void BM_cholesky_banded(benchmark::State& state) {
  const Eigen::Index T = state.range(0);
  const gpda::SymTridiagonal Q = random_spd(T, 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(gpda::cholesky_banded(Q));
  }
  state.SetComplexityN(T);
}

void BM_sparse_inverse_subset(benchmark::State& state) {
  const Eigen::Index T = state.range(0);
  const gpda::BandedCholeskyFactor L = gpda::cholesky_banded(random_spd(T, 3));
  for (auto _ : state) {
    benchmark::DoNotOptimize(gpda::sparse_inverse_subset(L));
  }
  state.SetComplexityN(T);
}

void BM_sample_gaussian(benchmark::State& state) {
  const Eigen::Index T = state.range(0);
  const gpda::BandedCholeskyFactor L = gpda::cholesky_banded(random_spd(T, 4));
  const Eigen::VectorXd mean = Eigen::VectorXd::Zero(T);
  std::uint64_t seed = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(gpda::sample_gaussian(L, mean, ++seed));
  }
  state.SetComplexityN(T);
}

}  // namespace

BENCHMARK(BM_thomas_solve)->RangeMultiplier(4)->Range(1 << 10, 1 << 18)->Complexity();
BENCHMARK(BM_cholesky_banded)->RangeMultiplier(4)->Range(1 << 10, 1 << 18)->Complexity();
BENCHMARK(BM_sparse_inverse_subset)->RangeMultiplier(4)->Range(1 << 10, 1 << 18)->Complexity();
BENCHMARK(BM_sample_gaussian)->RangeMultiplier(4)->Range(1 << 10, 1 << 16)->Complexity();
