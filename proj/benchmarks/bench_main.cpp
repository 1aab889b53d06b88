#include <benchmark/benchmark.h>

#include "loopcycle/clusters.hpp"
#include "loopcycle/events.hpp"
#include "loopcycle/experiments.hpp"
#include "loopcycle/gff.hpp"
#include "loopcycle/greens.hpp"
#include "loopcycle/loop_sampler.hpp"

using namespace loopcycle;

namespace {

void BM_GreenColumn(benchmark::State& state) {
  BoxConfig box{3, static_cast<int>(state.range(0))};
  Lattice lat(box);
  VertexId origin = lat.id(std::vector<int>(3, 0));
  for (auto _ : state) benchmark::DoNotOptimize(green_column(lat, origin));
  state.counters["vertices"] = static_cast<double>(lat.volume());
}
BENCHMARK(BM_GreenColumn)->Arg(4)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_LoopIntensity(benchmark::State& state) {
  BoxConfig box{static_cast<int>(state.range(0)), static_cast<int>(state.range(1))};
  for (auto _ : state) benchmark::DoNotOptimize(loop_intensity(box, suggested_lmax(box)));
}
BENCHMARK(BM_LoopIntensity)->Args({3, 4})->Args({3, 8})->Args({7, 3})->Unit(benchmark::kMillisecond);

void BM_SampleSoup(benchmark::State& state) {
  BoxConfig box{static_cast<int>(state.range(0)), static_cast<int>(state.range(1))};
  auto table = loop_intensity(box, suggested_lmax(box));
  std::uint64_t seed = 0;
  std::int64_t loops = 0;
  for (auto _ : state) {
    auto s = sample_soup(table, ++seed);
    attach_bridges(s, default_kappa(box.d));
    loops += static_cast<std::int64_t>(s.loops.size());
  }
  state.counters["loops/soup"] = benchmark::Counter(static_cast<double>(loops), benchmark::Counter::kAvgIterations);
}
BENCHMARK(BM_SampleSoup)->Args({3, 4})->Args({3, 8})->Args({7, 3})->Unit(benchmark::kMillisecond);

void BM_BuildClusters(benchmark::State& state) {
  BoxConfig box{3, static_cast<int>(state.range(0))};
  auto table = loop_intensity(box, suggested_lmax(box));
  auto s = sample_soup(table, 1);
  attach_bridges(s, default_kappa(3));
  for (auto _ : state) benchmark::DoNotOptimize(build_clusters(s));
}
BENCHMARK(BM_BuildClusters)->Arg(4)->Arg(8)->Unit(benchmark::kMicrosecond);

void BM_DetectCEps(benchmark::State& state) {
  BoxConfig box{3, 8};
  auto table = loop_intensity(box, suggested_lmax(box));
  auto family = tube_family(0.25, box);
  auto s = sample_soup(table, 1);
  attach_bridges(s, default_kappa(3));
  for (auto _ : state) {
    auto clusters = build_clusters(s);
    benchmark::DoNotOptimize(detect_C_eps(s, clusters, family));
  }
  state.counters["tubes"] = static_cast<double>(family.tubes.size());
}
BENCHMARK(BM_DetectCEps)->Unit(benchmark::kMillisecond);

void BM_GffSample(benchmark::State& state) {
  GffSampler sampler(BoxConfig{3, static_cast<int>(state.range(0))});
  std::uint64_t seed = 0;
  for (auto _ : state) {
    auto s = open_edges(sampler.sample(++seed), seed, default_kappa(3));
    benchmark::DoNotOptimize(sign_cluster_count(s));
  }
}
BENCHMARK(BM_GffSample)->Arg(3)->Arg(4)->Unit(benchmark::kMicrosecond);

void BM_EventDetectors(benchmark::State& state) {
  BoxConfig box{3, 4};
  auto table = loop_intensity(box, suggested_lmax(box));
  auto s = sample_soup(table, 3);
  attach_bridges(s, default_kappa(3));
  ExponentConfig cfg;
  cfg.a = cfg.b = 0.4;
  for (auto _ : state) {
    benchmark::DoNotOptimize(detect_pinching(s, cfg));
    benchmark::DoNotOptimize(detect_two_mesoscopic(s, build_clusters(s), cfg));
    benchmark::DoNotOptimize(detect_distant_connection(s, cfg));
  }
}
BENCHMARK(BM_EventDetectors)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
