// Compares the tuned OpenMP kernels against the serial reference loops.
#include <benchmark/benchmark.h>

#include <vector>

#include "mvgen/kernels.hpp"
#include "mvgen/rng.hpp"
#include "mvgen/threading.hpp"

using namespace mvgen;

namespace {

std::vector<float> random_vec(size_t n, uint64_t seed) {
  Rng rng(seed);
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(rng.normal());
  return v;
}

void bm_gemm_ref(benchmark::State& state) {
  int n = static_cast<int>(state.range(0));
  auto a = random_vec(static_cast<size_t>(n) * n, 1);
  auto b = random_vec(static_cast<size_t>(n) * n, 2);
  std::vector<float> c(static_cast<size_t>(n) * n);
  for (auto _ : state) {
    ref::gemm(a.data(), b.data(), c.data(), n, n, n);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * 2ull * n * n * n);
}

void bm_gemm_tuned(benchmark::State& state) {
  int n = static_cast<int>(state.range(0));
  set_thread_count(static_cast<int>(state.range(1)));
  auto a = random_vec(static_cast<size_t>(n) * n, 1);
  auto b = random_vec(static_cast<size_t>(n) * n, 2);
  std::vector<float> c(static_cast<size_t>(n) * n);
  for (auto _ : state) {
    kern::gemm(a.data(), b.data(), c.data(), n, n, n);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * 2ull * n * n * n);
  set_thread_count(0);
}

void bm_im2col_ref(benchmark::State& state) {
  ConvDims d = make_conv_dims(64, 32, 32, 4, 2, 1);
  auto img = random_vec(static_cast<size_t>(d.channels) * d.height * d.width, 3);
  std::vector<float> cols(static_cast<size_t>(d.patch_rows()) * d.patch_cols());
  for (auto _ : state) {
    ref::im2col(img.data(), cols.data(), d);
    benchmark::DoNotOptimize(cols.data());
  }
}

void bm_im2col_tuned(benchmark::State& state) {
  set_thread_count(static_cast<int>(state.range(0)));
  ConvDims d = make_conv_dims(64, 32, 32, 4, 2, 1);
  auto img = random_vec(static_cast<size_t>(d.channels) * d.height * d.width, 3);
  std::vector<float> cols(static_cast<size_t>(d.patch_rows()) * d.patch_cols());
  for (auto _ : state) {
    kern::im2col(img.data(), cols.data(), d);
    benchmark::DoNotOptimize(cols.data());
  }
  set_thread_count(0);
}

}  // namespace

BENCHMARK(bm_gemm_ref)->Arg(128)->Arg(256);
BENCHMARK(bm_gemm_tuned)->Args({128, 1})->Args({256, 1})->Args({256, 2})->Args({256, 4});
BENCHMARK(bm_im2col_ref);
BENCHMARK(bm_im2col_tuned)->Arg(1)->Arg(2);

BENCHMARK_MAIN();
