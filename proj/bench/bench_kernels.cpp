// Serial reference MLP vs the blocked kernels, at the batch shapes the
// estimators use (data batch 100, reference batches 1000 and 30000).

#include <benchmark/benchmark.h>

#include <random>

#include "minee/estimators.hpp"
#include "minee/nn.hpp"
#include "minee/nn_reference.hpp"

namespace {

using namespace minee;

nn::ParameterSet make_params(Index input_dim) {
  nn::NetworkSpec spec;
  spec.input_dim = input_dim;
  return nn::init_params(spec, 7);
}

SampleBatch make_batch(Index rows, Index cols) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> normal;
  SampleBatch x(rows, cols);
  for (Index i = 0; i < x.size(); ++i) x.data()[i] = normal(rng);
  return x;
}

void BM_ForwardReference(benchmark::State& state) {
  const auto p = make_params(12);
  const auto x = make_batch(state.range(0), 12);
  for (auto _ : state) benchmark::DoNotOptimize(nn::reference::forward(p, x));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_Forward(benchmark::State& state) {
  const auto p = make_params(12);
  const auto x = make_batch(state.range(0), 12);
  for (auto _ : state) benchmark::DoNotOptimize(nn::forward(p, x));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_BackwardReference(benchmark::State& state) {
  const auto p = make_params(12);
  const auto x = make_batch(state.range(0), 12);
  const Matrix cot = Matrix::Constant(x.rows(), 1, 1.0 / static_cast<double>(x.rows()));
  for (auto _ : state) benchmark::DoNotOptimize(nn::reference::backward(p, x, cot));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_Backward(benchmark::State& state) {
  const auto p = make_params(12);
  const auto x = make_batch(state.range(0), 12);
  const Matrix cot = Matrix::Constant(x.rows(), 1, 1.0 / static_cast<double>(x.rows()));
  for (auto _ : state) benchmark::DoNotOptimize(nn::backward(p, x, cot));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_DVLossAndGradient(benchmark::State& state) {
  const auto p = make_params(12);
  const auto data = make_batch(100, 12);
  const auto ref = make_batch(state.range(0), 12);
  for (auto _ : state) benchmark::DoNotOptimize(dv_loss_and_gradient(p, 0, data, ref));
  state.SetItemsProcessed(state.iterations() * (state.range(0) + 100));
}

}  // namespace

BENCHMARK(BM_ForwardReference)->Arg(100)->Arg(1000);
BENCHMARK(BM_Forward)->Arg(100)->Arg(1000)->Arg(30000);
BENCHMARK(BM_BackwardReference)->Arg(100)->Arg(1000);
BENCHMARK(BM_Backward)->Arg(100)->Arg(1000)->Arg(30000);
BENCHMARK(BM_DVLossAndGradient)->Arg(1000)->Arg(30000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
