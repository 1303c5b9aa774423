#include <benchmark/benchmark.h>

#include "surfacenet/procedural.hpp"
#include "surfacenet/renderer.hpp"

using namespace surfacenet;

static void BM_ShadePixel(benchmark::State& state) {
    ShadingPoint p;
    p.diffuse = {0.5, 0.4, 0.3};
    p.normal = normalized({0.1, -0.05, 1.0});
    p.roughness = 0.4;
    p.specular_f0 = {0.04, 0.04, 0.04};
    const Vec3 l = normalized({0.2, 0.3, 1.0});
    const Vec3 v = normalized({-0.1, 0.1, 1.0});
    for (auto _ : state) {
        benchmark::DoNotOptimize(shade_pixel(p, l, v, {1.0, 1.0, 1.0}));
    }
}
BENCHMARK(BM_ShadePixel);

static void BM_RenderFlash(benchmark::State& state) {
    const auto res = static_cast<int>(state.range(0));
    const MaterialMaps maps = generate_procedural(3, Pattern::Bricks, res);
    const LightSetup setup = LightSetup::flash({0.0, 0.0, 1.0}, 3.14159);
    for (auto _ : state) {
        benchmark::DoNotOptimize(render_flash(maps, setup));
    }
    state.SetItemsProcessed(state.iterations() * res * res);
}
BENCHMARK(BM_RenderFlash)->Arg(64)->Arg(256);

static void BM_GenerateProcedural(benchmark::State& state) {
    std::uint64_t seed = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(generate_procedural(seed++, Pattern::Voronoi, 64));
    }
}
BENCHMARK(BM_GenerateProcedural);
