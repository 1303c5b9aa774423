#include <benchmark/benchmark.h>

#include "surfacenet/generator.hpp"
#include "surfacenet/rng.hpp"

using namespace surfacenet;

static void BM_Conv2dForward(benchmark::State& state) {
    Rng rng(1);
    nn::Conv2d conv(32, 32, 3, 1, 1);
    conv.init(rng);
    Tensor x(32, 64, 64);
    for (double& v : x.v) v = rng.uniform();
    for (auto _ : state) {
        benchmark::DoNotOptimize(conv.forward(x, false));
    }
}
BENCHMARK(BM_Conv2dForward);

static void BM_GeneratorForward(benchmark::State& state) {
    const auto res = static_cast<int>(state.range(0));
    GeneratorNetwork net(GeneratorConfig::desk(), 1);
    Rng rng(2);
    Tensor x(3, res, res);
    for (double& v : x.v) v = rng.uniform();
    for (auto _ : state) {
        benchmark::DoNotOptimize(net.forward(x, false));
    }
}
BENCHMARK(BM_GeneratorForward)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

static void BM_GeneratorForwardBackward(benchmark::State& state) {
    GeneratorNetwork net(GeneratorConfig::desk(), 1);
    Rng rng(2);
    Tensor x(3, 64, 64);
    for (double& v : x.v) v = rng.uniform();
    for (auto _ : state) {
        auto heads = net.forward(x);
        net.backward(heads);
        benchmark::DoNotOptimize(heads);
    }
}
BENCHMARK(BM_GeneratorForwardBackward)->Unit(benchmark::kMillisecond);
