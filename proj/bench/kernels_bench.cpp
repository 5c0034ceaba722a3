// Copyright 2026 The reltrack Authors
// SPDX-License-Identifier: Apache-2.0

// Serial reference vs OpenMP kernels, and deformable vs dense attention.
// Run with --benchmark_filter=... to select a family.

#include <benchmark/benchmark.h>

#include <cmath>
#include <span>
#include <vector>

#include "reltrack/gte/gte.hpp"
#include "reltrack/tensor/init.hpp"
#include "reltrack/tensor/kernels.hpp"

namespace {

namespace k = reltrack::kernels;
using reltrack::Rng;
using reltrack::Shape;

std::vector<float> random_buffer(std::size_t n, Rng& rng, double scale = 1.0) {
  const auto t = reltrack::normal_tensor<float>(Shape{n}, scale, rng);
  return {t.values().begin(), t.values().end()};
}

template <k::Exec E>
void BM_Linear(benchmark::State& state) {
  const std::size_t rows = state.range(0), in = 64, out = 64;
  Rng rng(1);
  const auto x = random_buffer(rows * in, rng), w = random_buffer(in * out, rng), b = random_buffer(out, rng);
  std::vector<float> y(rows * out);
  for (auto _ : state) {
    if constexpr (E == k::Exec::kSerial)
      k::serial::linear<float>(x, w, b, y, rows, in, out);
    else
      k::omp::linear<float>(x, w, b, y, rows, in, out);
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * rows);
}

template <k::Exec E>
void BM_Conv2d(benchmark::State& state) {
  const std::size_t side = state.range(0), cin = 16, cout = 16, ks = 3;
  Rng rng(2);
  const auto x = random_buffer(side * side * cin, rng), w = random_buffer(ks * ks * cin * cout, rng, 0.1),
             b = random_buffer(cout, rng);
  std::vector<float> y(side * side * cout);
  for (auto _ : state) {
    if constexpr (E == k::Exec::kSerial)
      k::serial::conv2d<float>(x, w, b, y, side, side, cin, cout, ks, 1, 1);
    else
      k::omp::conv2d<float>(x, w, b, y, side, side, cin, cout, ks, 1, 1);
    benchmark::DoNotOptimize(y.data());
  }
}

template <k::Exec E>
void BM_DeformAggregate(benchmark::State& state) {
  const k::DeformGeometry geo{static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(0)), 32,
                              4, 9};
  const std::size_t n = geo.height * geo.width;
  Rng rng(3);
  const auto v = random_buffer(n * geo.channels, rng), off = random_buffer(n * geo.heads * geo.samples * 2, rng, 2.0);
  const std::vector<float> wts(n * geo.heads * geo.samples, 1.0f / geo.samples);
  std::vector<float> y(n * geo.channels);
  for (auto _ : state) {
    if constexpr (E == k::Exec::kSerial)
      k::serial::deform_aggregate<float>(v, off, wts, y, geo);
    else
      k::omp::deform_aggregate<float>(v, off, wts, y, geo);
    benchmark::DoNotOptimize(y.data());
  }
  state.SetComplexityN(n);
}

template <k::Exec E>
void BM_DenseKernel(benchmark::State& state) {
  const std::size_t side = state.range(0), n = side * side, c = 32, heads = 4;
  Rng rng(4);
  const auto q = random_buffer(n * c, rng), kk = random_buffer(n * c, rng), v = random_buffer(n * c, rng);
  std::vector<float> y(n * c);
  for (auto _ : state) {
    if constexpr (E == k::Exec::kSerial)
      k::serial::dense_attention<float>(q, kk, v, y, n, c, heads, std::sqrt(c / double(heads)));
    else
      k::omp::dense_attention<float>(q, kk, v, y, n, c, heads, std::sqrt(c / double(heads)));
    benchmark::DoNotOptimize(y.data());
  }
  state.SetComplexityN(n);
}

// Whole attention layers, serial, over growing maps.
void BM_DeformableLayer(benchmark::State& state) {
  const std::size_t side = state.range(0);
  Rng rng(5);
  auto p = reltrack::gte::DeformAttnParams<float>::init(32, 4, 9, rng);
  p.offset_b = reltrack::Parameter<float>(reltrack::uniform_tensor<float>(p.offset_b.shape(), -3.0, 3.0, rng));
  const auto x = reltrack::normal_tensor<float>(Shape{1, side, side, 32}, 1.0, rng);
  for (auto _ : state) benchmark::DoNotOptimize(reltrack::gte::deformable_attention_forward(x, p, k::Exec::kSerial));
  state.SetComplexityN(side * side);
}

void BM_DenseLayer(benchmark::State& state) {
  const std::size_t side = state.range(0);
  Rng rng(6);
  const auto p = reltrack::gte::DenseAttnParams<float>::init(32, 4, rng);
  const auto x = reltrack::normal_tensor<float>(Shape{1, side, side, 32}, 1.0, rng);
  for (auto _ : state) benchmark::DoNotOptimize(reltrack::gte::dense_attention_forward(x, p, k::Exec::kSerial));
  state.SetComplexityN(side * side);
}

}  // namespace

BENCHMARK(BM_Linear<k::Exec::kSerial>)->Arg(4096);
BENCHMARK(BM_Linear<k::Exec::kParallel>)->Arg(4096);
BENCHMARK(BM_Conv2d<k::Exec::kSerial>)->Arg(64);
BENCHMARK(BM_Conv2d<k::Exec::kParallel>)->Arg(64);
BENCHMARK(BM_DeformAggregate<k::Exec::kSerial>)->Arg(32)->Arg(64);
BENCHMARK(BM_DeformAggregate<k::Exec::kParallel>)->Arg(32)->Arg(64);
BENCHMARK(BM_DenseKernel<k::Exec::kSerial>)->Arg(16)->Arg(32);
BENCHMARK(BM_DenseKernel<k::Exec::kParallel>)->Arg(16)->Arg(32);
BENCHMARK(BM_DeformableLayer)->Arg(16)->Arg(32)->Arg(64)->Complexity(benchmark::oN);
BENCHMARK(BM_DenseLayer)->Arg(16)->Arg(32)->Arg(64)->Complexity(benchmark::oNSquared);
BENCHMARK_MAIN();
