// Serial reference vs. blocked/OpenMP kernels at the shapes the models use.
#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "ega/kernels.hpp"

namespace {

std::vector<double> random_vec(std::size_t n) {
  std::mt19937_64 rng(42);
  std::normal_distribution<double> d;
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

// GNN input projection: [19 x L] * [L x 64]
template <bool Parallel>
void BM_Matmul(benchmark::State& state) {
  const std::size_t m = 19, k = static_cast<std::size_t>(state.range(0)), n = 64;
  const auto a = random_vec(m * k), b = random_vec(k * n);
  std::vector<double> c(m * n);
  for (auto _ : state) {
    if constexpr (Parallel)
      ega::kernels::matmul(a, b, c, m, k, n);
    else
      ega::kernels::serial::matmul(a, b, c, m, k, n);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(m * k * n));
}

// Encoder block: channels x length, kernel 2 stride 2.
template <bool Parallel>
void BM_Conv1dForward(benchmark::State& state) {
  const std::size_t ch = static_cast<std::size_t>(state.range(0));
  ega::kernels::Conv1dDims d{ch, 340, ch, 2, 2};
  const auto x = random_vec(ch * d.length), w = random_vec(ch * ch * 2), bias = random_vec(ch);
  std::vector<double> out(ch * d.out_length());
  for (auto _ : state) {
    if constexpr (Parallel)
      ega::kernels::conv1d_forward(x, w, bias, out, d);
    else
      ega::kernels::serial::conv1d_forward(x, w, bias, out, d);
    benchmark::DoNotOptimize(out.data());
  }
}

template <bool Parallel>
void BM_Conv1dBackwardInput(benchmark::State& state) {
  const std::size_t ch = static_cast<std::size_t>(state.range(0));
  ega::kernels::Conv1dDims d{ch, 340, ch, 2, 2};
  const auto g = random_vec(ch * d.out_length()), w = random_vec(ch * ch * 2);
  std::vector<double> dx(ch * d.length);
  for (auto _ : state) {
    if constexpr (Parallel)
      ega::kernels::conv1d_backward_input(g, w, dx, d);
    else
      ega::kernels::serial::conv1d_backward_input(g, w, dx, d);
    benchmark::DoNotOptimize(dx.data());
  }
}

}  // namespace

BENCHMARK(BM_Matmul<false>)->Arg(1024)->Arg(15360);
BENCHMARK(BM_Matmul<true>)->Arg(1024)->Arg(15360);
BENCHMARK(BM_Conv1dForward<false>)->Arg(64)->Arg(192);
BENCHMARK(BM_Conv1dForward<true>)->Arg(64)->Arg(192);
BENCHMARK(BM_Conv1dBackwardInput<false>)->Arg(64)->Arg(192);
BENCHMARK(BM_Conv1dBackwardInput<true>)->Arg(64)->Arg(192);

BENCHMARK_MAIN();
