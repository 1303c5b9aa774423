#include <benchmark/benchmark.h>

#include "surfacenet/losses.hpp"
#include "surfacenet/rng.hpp"

using namespace surfacenet;

static void BM_MsSsim(benchmark::State& state) {
    Rng rng(1);
    Tensor a(3, 64, 64), b(3, 64, 64);
    for (double& v : a.v) v = rng.uniform();
    for (double& v : b.v) v = rng.uniform();
    for (auto _ : state) {
        benchmark::DoNotOptimize(ms_ssim(a, b));
    }
}
BENCHMARK(BM_MsSsim);

static void BM_MsSsimWithGrad(benchmark::State& state) {
    Rng rng(1);
    Tensor a(3, 64, 64), b(3, 64, 64);
    for (double& v : a.v) v = rng.uniform();
    for (double& v : b.v) v = rng.uniform();
    for (auto _ : state) {
        Tensor grad(3, 64, 64);
        benchmark::DoNotOptimize(ms_ssim(a, b, &grad));
    }
}
BENCHMARK(BM_MsSsimWithGrad);
