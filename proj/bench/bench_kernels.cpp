// Parallel kernels against the serial reference loops on training-sized batches.
#include <benchmark/benchmark.h>

#include <vector>

#include "feasc/kernels.hpp"
#include "feasc/rng.hpp"

using namespace feasc;

namespace {

Tensor random_tensor(std::vector<int> shape, std::uint64_t seed) {
  Tensor t(std::move(shape));
  Rng rng(seed);
  for (auto& v : t.values()) v = rng.normal();
  return t;
}

// Second encoder stage at 32 px input: 16 -> 32 channels on 16x16 maps.
struct ConvCase {
  Conv2dGeometry g{16, 32, 3, 2, 1};
  Tensor x, w, gy;
  ConvCase(int batch) {
    x = random_tensor({batch, 16, 16, 16}, 1);
    w = random_tensor({32, 16, 3, 3}, 2);
    gy = random_tensor({batch, 32, g.out_size(16), g.out_size(16)}, 3);
  }
};

std::vector<std::uint8_t> random_mask(std::size_t n) {
  std::vector<std::uint8_t> m(n);
  Rng rng(4);
  for (auto& b : m) b = rng.bernoulli(0.2);
  return m;
}

void BM_conv_forward_parallel(benchmark::State& state) {
  ConvCase c(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(kernels::conv2d_forward(c.x, c.w, c.g));
}

void BM_conv_forward_serial(benchmark::State& state) {
  ConvCase c(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(reference::conv2d_forward(c.x, c.w, c.g));
}

void BM_conv_backward_parallel(benchmark::State& state) {
  ConvCase c(static_cast<int>(state.range(0)));
  Tensor cols;
  kernels::conv2d_forward(c.x, c.w, c.g, &cols);
  const std::vector<int> shape(c.x.shape().begin(), c.x.shape().end());
  for (auto _ : state) {
    Tensor gw(c.w.shape()), gx;
    kernels::conv2d_backward(c.gy, cols, c.w, c.g, shape, &gx, gw);
    benchmark::DoNotOptimize(gx);
  }
}

void BM_conv_backward_serial(benchmark::State& state) {
  ConvCase c(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    Tensor gw(c.w.shape());
    benchmark::DoNotOptimize(reference::conv2d_backward(c.x, c.gy, c.w, c.g, gw));
  }
}

void BM_channel_sum_parallel(benchmark::State& state) {
  const Tensor f = random_tensor({static_cast<int>(state.range(0)), 32, 8, 8}, 5);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::channel_sum(f));
}

void BM_channel_sum_serial(benchmark::State& state) {
  const Tensor f = random_tensor({static_cast<int>(state.range(0)), 32, 8, 8}, 5);
  for (auto _ : state) benchmark::DoNotOptimize(reference::channel_sum(f));
}

void BM_mask_parallel(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Tensor f = random_tensor({n, 32, 8, 8}, 6);
  const auto m = random_mask(static_cast<std::size_t>(n) * 64);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::apply_spatial_mask(f, m));
}

void BM_mask_serial(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Tensor f = random_tensor({n, 32, 8, 8}, 6);
  const auto m = random_mask(static_cast<std::size_t>(n) * 64);
  for (auto _ : state) benchmark::DoNotOptimize(reference::apply_spatial_mask(f, m));
}

}  // namespace

BENCHMARK(BM_conv_forward_parallel)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_conv_forward_serial)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_conv_backward_parallel)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_conv_backward_serial)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_channel_sum_parallel)->Arg(64)->Arg(256);
BENCHMARK(BM_channel_sum_serial)->Arg(64)->Arg(256);
BENCHMARK(BM_mask_parallel)->Arg(64)->Arg(256);
BENCHMARK(BM_mask_serial)->Arg(64)->Arg(256);

BENCHMARK_MAIN();
