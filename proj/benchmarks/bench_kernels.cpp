#include <benchmark/benchmark.h>

#include "cscpr/cscc.hpp"
#include "cscpr/extractor.hpp"
#include "cscpr/model.hpp"
#include "cscpr/rng.hpp"
#include "cscpr/sampling.hpp"
#include "cscpr/scc.hpp"

using namespace cscpr;

namespace {

std::vector<Vec3> positions(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Vec3> p(n);
  for (auto& x : p) x = {rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(0, 3)};
  return p;
}

PointCloud cloud(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Point> pts(n);
  for (auto& p : pts) {
    p.position = {rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(0, 3)};
    p.color = {rng.uniform(), rng.uniform(), rng.uniform()};
    p.normal = Vec3(rng.normal(), rng.normal(), rng.normal()).normalized();
  }
  return PointCloud(std::move(pts));
}

Matrix gaussian(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

}  // namespace

static void BM_FarthestPointSample(benchmark::State& state) {
  const auto p = positions(static_cast<std::size_t>(state.range(0)), 1);
  const auto m = static_cast<std::size_t>(state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(farthest_point_sample(std::span<const Vec3>(p), m));
}
BENCHMARK(BM_FarthestPointSample)->Args({4096, 800})->Args({800, 300})->Args({300, 100});

static void BM_Knn(benchmark::State& state) {
  const auto base = positions(static_cast<std::size_t>(state.range(0)), 2);
  const auto query = positions(static_cast<std::size_t>(state.range(1)), 3);
  const auto k = static_cast<std::size_t>(state.range(2));
  for (auto _ : state) benchmark::DoNotOptimize(knn(query, base, k));
}
BENCHMARK(BM_Knn)->Args({4096, 800, 98})->Args({300, 100, 9});

static void BM_SccForward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  FeatureMatrix x{gaussian(n, 128, 4), positions(n, 5)};
  const auto p = SCCParams::init(128, 128, 256, 100, 4, 6);
  for (auto _ : state) benchmark::DoNotOptimize(scc_forward(x, p));
}
BENCHMARK(BM_SccForward)->Arg(300);

static void BM_CsccForward(benchmark::State& state) {
  CenterFeatures q{gaussian(100, 256, 7), std::vector<Vec3>(100, Vec3::Zero()), 300};
  CenterFeatures d{gaussian(100, 256, 8), std::vector<Vec3>(100, Vec3::Zero()), 300};
  const auto p = CSCCParams::init(256, 256, static_cast<std::size_t>(state.range(0)), 9);
  for (auto _ : state) benchmark::DoNotOptimize(cscc_forward(q, d, p));
}
BENCHMARK(BM_CsccForward)->Arg(500)->Arg(10000);

static void BM_ExtractFeatures(benchmark::State& state) {
  const auto config = state.range(0) == 0 ? ExtractorConfig::small() : ExtractorConfig::standard();
  const auto w = ExtractorWeights::init(config, 10);
  const auto c = cloud(static_cast<std::size_t>(state.range(1)), 11);
  for (auto _ : state) benchmark::DoNotOptimize(extract_features(c, config, w));
}
BENCHMARK(BM_ExtractFeatures)->Args({0, 1024})->Args({1, 4096})->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
