// Parallel kernels against their serial reference implementations.

#include <benchmark/benchmark.h>

#include "dbsloc/atlas.hpp"
#include "dbsloc/parallel.hpp"
#include "dbsloc/phantom.hpp"
#include "dbsloc/reference.hpp"
#include "dbsloc/registration.hpp"
#include "dbsloc/sampling.hpp"
#include "dbsloc/segmentation.hpp"

using namespace dbs;

namespace {

const Phantom& phantom() {
  static const Phantom ph = generate(PhantomSpec{});
  return ph;
}

const MaskedVolume& masked() {
  static const MaskedVolume mv = apply_roi(phantom().volume, rasterize_atlas(default_atlas(), phantom().volume.grid()));
  return mv;
}

AffineTransform motion() {
  return AffineTransform::rigid(Vector3(0.05, -0.03, 0.08), Vector3(2.5, -1.0, 3.0), phantom().volume.grid().center_world());
}

void threads(benchmark::State& state) {
  parallel::set_thread_count(static_cast<int>(state.range(0)));
  masked();
}

void BM_Rasterize(benchmark::State& state) {
  threads(state);
  for (auto _ : state) benchmark::DoNotOptimize(rasterize_atlas(default_atlas(), phantom().volume.grid()));
}
void BM_RasterizeReference(benchmark::State& state) {
  masked();
  for (auto _ : state) benchmark::DoNotOptimize(reference::rasterize_atlas(default_atlas(), phantom().volume.grid()));
}

void BM_Resample(benchmark::State& state) {
  threads(state);
  const auto t = motion();
  for (auto _ : state) benchmark::DoNotOptimize(resample(phantom().volume, t, phantom().volume.grid()));
}
void BM_ResampleReference(benchmark::State& state) {
  const auto t = motion();
  for (auto _ : state) benchmark::DoNotOptimize(reference::resample(phantom().volume, t, phantom().volume.grid()));
}

void BM_Segment(benchmark::State& state) {
  threads(state);
  const auto opts = SegmentationOptions::for_grid(masked().grid());
  for (auto _ : state) benchmark::DoNotOptimize(segment_volume(masked(), 7.885, opts));
}
void BM_SegmentReference(benchmark::State& state) {
  const auto opts = SegmentationOptions::for_grid(masked().grid());
  for (auto _ : state) benchmark::DoNotOptimize(reference::segment_volume(masked(), 7.885, opts));
}

void BM_Similarity(benchmark::State& state) {
  threads(state);
  const auto t = motion();
  for (auto _ : state) benchmark::DoNotOptimize(similarity(phantom().volume, phantom().volume, t, Metric::Ncc));
}
void BM_SimilarityReference(benchmark::State& state) {
  const auto t = motion();
  for (auto _ : state)
    benchmark::DoNotOptimize(reference::similarity(phantom().volume, phantom().volume, t, Metric::Ncc));
}

void BM_Phantom(benchmark::State& state) {
  threads(state);
  PhantomSpec spec;
  spec.dims = {96, 96, 90};
  spec.spacing = 2.9;
  for (auto _ : state) benchmark::DoNotOptimize(generate(spec));
}
void BM_PhantomReference(benchmark::State& state) {
  PhantomSpec spec;
  spec.dims = {96, 96, 90};
  spec.spacing = 2.9;
  for (auto _ : state) benchmark::DoNotOptimize(reference::generate_phantom(spec));
}

}  // namespace

#define THREAD_ARGS ->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime()

BENCHMARK(BM_Rasterize) THREAD_ARGS;
BENCHMARK(BM_RasterizeReference)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Resample) THREAD_ARGS;
BENCHMARK(BM_ResampleReference)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Segment) THREAD_ARGS;
BENCHMARK(BM_SegmentReference)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Similarity) THREAD_ARGS;
BENCHMARK(BM_SimilarityReference)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Phantom) THREAD_ARGS;
BENCHMARK(BM_PhantomReference)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
