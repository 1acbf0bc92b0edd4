#include <benchmark/benchmark.h>

#include "rareis/gaussian_is.hpp"
#include "rareis/multilevel.hpp"
#include "rareis/normal.hpp"
#include "rareis/rng.hpp"

using namespace rareis;

namespace {

WeightedBatch linear_batch(std::size_t dim, std::size_t n) {
  const ModelSpec spec = ModelSpec::linear_family(10, 1.0, dim - 10, 0.01);
  Model model(spec);
  RngStream rng(1, 1);
  PointMatrix x = sample_std_normal_batch(rng, n, dim);
  std::vector<double> r = model.evaluate(x);
  const double level = next_level(r, 0.1, INFINITY);
  return WeightedBatch::make(std::move(x), std::move(r), level, ShiftVector::Zero(dim));
}

void BM_Philox(benchmark::State& state) {
  RngStream rng(1, 1);
  for (auto _ : state) benchmark::DoNotOptimize(rng.next_u64());
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_Philox);

void BM_NormalBatch(benchmark::State& state) {
  RngStream rng(1, 1);
  const auto dim = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(sample_std_normal_batch(rng, 1000, dim));
  state.SetItemsProcessed(state.iterations() * 1000 * state.range(0));
}
BENCHMARK(BM_NormalBatch)->Arg(110)->Arg(1010);

void BM_UObjective(benchmark::State& state) {
  const auto dim = static_cast<std::size_t>(state.range(0));
  const WeightedBatch batch = linear_batch(dim, 1000);
  const ShiftVector theta = ShiftVector::Constant(dim, 0.1);
  for (auto _ : state) benchmark::DoNotOptimize(u_objective(theta, batch));
}
BENCHMARK(BM_UObjective)->Arg(20)->Arg(110);

void BM_SolveShift(benchmark::State& state) {
  const auto dim = static_cast<std::size_t>(state.range(0));
  const WeightedBatch batch = linear_batch(dim, 1000);
  for (auto _ : state) benchmark::DoNotOptimize(solve_optimal_shift(batch, ShiftVector::Zero(dim)));
}
BENCHMARK(BM_SolveShift)->Arg(110)->Arg(1010)->Unit(benchmark::kMillisecond);

void BM_EstimateProbability(benchmark::State& state) {
  const auto dim = static_cast<std::size_t>(state.range(0));
  const ModelSpec spec = ModelSpec::linear_family(10, 1.0, dim - 10, 0.01);
  Model model(spec, static_cast<std::size_t>(state.range(1)));
  const ShiftVector theta = spec.coefficients.normalized() * 4.0;
  RngStream rng(1, 2);
  for (auto _ : state) benchmark::DoNotOptimize(estimate_probability(model, 4.0, theta, 1000, rng));
  state.SetItemsProcessed(state.iterations() * 1000);
}
BENCHMARK(BM_EstimateProbability)->Args({110, 1})->Args({1010, 1})->Args({1010, 4})->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
