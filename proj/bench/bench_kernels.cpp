#include <benchmark/benchmark.h>

#include <vector>

#include "pwmd/models.hpp"
#include "pwmd/parallel.hpp"
#include "pwmd/special.hpp"
#include "pwmd/wasserstein.hpp"

using namespace pwmd;

namespace {

PointCloud cloud(int n, int d, std::uint64_t seed) {
  PointCloud x(n, d);
  for (int i = 0; i < n; ++i) {
    CounterRng rng(seed, static_cast<std::uint64_t>(i));
    for (int k = 0; k < d; ++k) x(i, k) = normal_quantile(rng.uniform_open());
  }
  return x;
}

Exec exec_of(const benchmark::State& state) { return state.range(1) == 0 ? Exec::serial : Exec::parallel; }

void BM_CostMatrix(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const PointCloud x = cloud(n, 4, 1), y = cloud(n, 4, 2);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::cost_matrix(x, y, 1.5, exec_of(state)));
  state.SetItemsProcessed(state.iterations() * n * n);
}

void BM_SoftminRows(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const PointCloud x = cloud(static_cast<int>(n), 2, 3), y = cloud(static_cast<int>(n), 2, 4);
  const std::vector<double> cost = kernels::cost_matrix(x, y, 2.0, Exec::serial);
  std::vector<double> pot(n, 0.0), out(n);
  for (auto _ : state) {
    kernels::softmin_rows(cost, n, n, pot, 0.05, out, exec_of(state));
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n));
}

void BM_SampleW(benchmark::State& state) {
  const auto reps = static_cast<std::size_t>(state.range(0));
  const Model model = IidSum{64, DistSpec::laplace_unit_var()};
  for (auto _ : state) benchmark::DoNotOptimize(sample_w(model, reps, 5, exec_of(state), SumStrategy::per_summand));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(reps));
}

}  // namespace

BENCHMARK(BM_CostMatrix)->ArgsProduct({{256, 1024}, {0, 1}})->ArgNames({"n", "parallel"})->UseRealTime();
BENCHMARK(BM_SoftminRows)->ArgsProduct({{256, 1024}, {0, 1}})->ArgNames({"n", "parallel"})->UseRealTime();
BENCHMARK(BM_SampleW)->ArgsProduct({{1 << 14, 1 << 17}, {0, 1}})->ArgNames({"reps", "parallel"})->UseRealTime();

BENCHMARK_MAIN();
