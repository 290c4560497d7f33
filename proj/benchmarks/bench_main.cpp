#include <benchmark/benchmark.h>

#include <cmath>
#include <vector>

#include "crowdsynth/eval.hpp"
#include "crowdsynth/geometry.hpp"
#include "crowdsynth/odnms.hpp"
#include "crowdsynth/rng.hpp"
#include "crowdsynth/synthesis.hpp"

using namespace crowdsynth;

namespace {

std::vector<Detection> clustered_detections(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Detection> dets;
  dets.reserve(n);
  const std::size_t clusters = 1 + n / 10;
  std::vector<std::pair<double, double>> centers;
  for (std::size_t c = 0; c < clusters; ++c) {
    centers.emplace_back(rng.uniform(0, 1200), rng.uniform(0, 800));
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto& [cx, cy] = centers[rng.index(clusters)];
    const double w = rng.uniform(20, 60);
    const double h = 2 * w;
    dets.push_back({BBox::from_center(cx + rng.uniform(-0.3, 0.3) * w,
                                      cy + rng.uniform(-0.3, 0.3) * h, w, h),
                    rng.uniform01(), 1.0 + rng.uniform(0, 3)});
  }
  return dets;
}

Scene crowd_scene(std::int64_t n) {
  CrowdSceneSpec spec;
  spec.clusters = static_cast<int>(std::max<std::int64_t>(1, n / 5));
  spec.max_cluster_size = 9;
  return make_crowd_scenes(1, spec, static_cast<std::uint64_t>(n)).front();
}

}  // namespace

static void BM_StandardNms(benchmark::State& state) {
  const auto dets = clustered_detections(static_cast<std::size_t>(state.range(0)), 1);
  for (auto _ : state) benchmark::DoNotOptimize(standard_nms_indices(dets, 0.5));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_StandardNms)->RangeMultiplier(4)->Range(64, 4096)->Complexity();

static void BM_OdNms(benchmark::State& state) {
  const auto dets = clustered_detections(static_cast<std::size_t>(state.range(0)), 1);
  const NmsConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(od_nms_indices(dets, cfg));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_OdNms)->RangeMultiplier(4)->Range(64, 4096)->Complexity();

static void BM_DepthLabels(benchmark::State& state) {
  Scene scene = crowd_scene(state.range(0));
  for (auto _ : state) {
    assign_depth_labels(scene, DepthLabelScope::kAll);
    benchmark::ClobberMemory();
  }
  state.counters["instances"] = static_cast<double>(scene.instances.size());
}
BENCHMARK(BM_DepthLabels)->Arg(20)->Arg(100)->Arg(400);

static void BM_SynthesizeScene(benchmark::State& state) {
  PatchLibrary lib;
  for (int i = 0; i < 8; ++i) {
    Image img(12, 24, {90, 90, 90, 255});
    lib.patches.emplace_back(i, std::move(img), 0.2, "person");
  }
  Scene base;
  base.image_id = 1;
  base.image_width = 640;
  base.image_height = 480;
  for (int i = 0; i < 10; ++i) {
    ObjectInstance o;
    o.id = i + 1;
    o.bbox = BBox::from_xywh(20 + 60 * i, 100 + 10 * i, 40, 100);
    o.depth_rank = i;
    base.instances.push_back(o);
  }
  const SynthesisConfig cfg;
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(synthesize_scene(base, lib, cfg, seed++));
}
BENCHMARK(BM_SynthesizeScene);

static void BM_SimulateDetections(benchmark::State& state) {
  const Scene scene = crowd_scene(state.range(0));
  SimConfig cfg;
  for (auto _ : state) {
    benchmark::DoNotOptimize(simulate_detections(scene, cfg));
    ++cfg.seed;
  }
}
BENCHMARK(BM_SimulateDetections)->Arg(20)->Arg(100);
BENCHMARK_MAIN();
