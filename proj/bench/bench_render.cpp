// Serial reference renderer vs the tiled OpenMP renderer.
#include <benchmark/benchmark.h>

#include <random>

#include "bokeh/render.hpp"
#include "bokeh/synth.hpp"

namespace {

bokeh::Scene scene(int size) {
  return bokeh::gen_scene(bokeh::random_scene_spec(7, size, size));
}

bokeh::RenderParams params(double intensity) {
  bokeh::RenderParams p;
  p.focal_disparity = 0.5;
  p.intensity = intensity;
  return p;
}

void BM_Serial(benchmark::State& state) {
  const auto s = scene(static_cast<int>(state.range(0)));
  const auto p = params(static_cast<double>(state.range(1)));
  for (auto _ : state) benchmark::DoNotOptimize(bokeh::render_bokeh(s.aif, s.disparity, p));
  state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(0));
}

void BM_Tiled(benchmark::State& state) {
  const auto s = scene(static_cast<int>(state.range(0)));
  const auto p = params(static_cast<double>(state.range(1)));
  const int tile = static_cast<int>(state.range(2));
  for (auto _ : state) benchmark::DoNotOptimize(bokeh::render_tiled(s.aif, s.disparity, p, tile));
  state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(0));
}

}  // namespace

BENCHMARK(BM_Serial)->Args({128, 10})->Args({256, 10})->Args({256, 30})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Tiled)
    ->Args({128, 10, 32})
    ->Args({256, 10, 64})
    ->Args({256, 30, 64})
    ->Args({256, 30, 128})
    ->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
