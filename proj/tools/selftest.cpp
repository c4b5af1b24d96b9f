#include "selftest.hpp"

#include <algorithm>
#include <functional>
#include <limits>
#include <ostream>
#include <set>
#include <string>

#include "cscpr/gradient_check.hpp"
#include "cscpr/pipeline.hpp"
#include "cscpr/rng.hpp"
#include "cscpr/sampling.hpp"
#include "cscpr/synthetic.hpp"
#include "cscpr/voxel.hpp"

namespace cscpr::cli {

namespace {

std::vector<Vec3> random_points(Rng& rng, std::size_t n, double extent) {
  std::vector<Vec3> pts(n);
  for (auto& p : pts) p = {rng.uniform(0, extent), rng.uniform(0, extent), rng.uniform(0, extent)};
  return pts;
}

bool overlap_check(std::uint64_t seed) {
  Rng rng(seed, 1);
  for (int t = 0; t < 50; ++t) {
    const auto a = random_points(rng, 1 + rng.below(60), 0.5);
    const auto b = random_points(rng, 1 + rng.below(60), 0.5);
    std::set<VoxelKey> sa, sb;
    for (const auto& p : a) sa.insert(voxel_of(p, 0.1));
    for (const auto& p : b) sb.insert(voxel_of(p, 0.1));
    std::size_t inter = 0;
    for (const auto& k : sa) inter += sb.count(k);
    const double iou = static_cast<double>(inter) / static_cast<double>(sa.size() + sb.size() - inter);
    const double cov = static_cast<double>(inter) / static_cast<double>(sa.size());
    const auto ga = voxelize(a, 0.1);
    const auto gb = voxelize(b, 0.1);
    if (voxel_iou(ga, gb) != iou || voxel_coverage(ga, gb) != cov) return false;
  }
  return true;
}

bool sampling_check(std::uint64_t seed) {
  Rng rng(seed, 2);
  for (int t = 0; t < 50; ++t) {
    const auto pts = random_points(rng, 2 + rng.below(10), 1.0);
    const std::size_t k = 1 + rng.below(pts.size());
    const auto nb = knn(pts, pts, k);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      std::vector<std::size_t> order(pts.size());
      for (std::size_t j = 0; j < order.size(); ++j) order[j] = j;
      std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
        const double dx = (pts[x] - pts[i]).squaredNorm();
        const double dy = (pts[y] - pts[i]).squaredNorm();
        if (dx != dy) return dx < dy;
        if (lex_less(pts[x], pts[y]) || lex_less(pts[y], pts[x])) return lex_less(pts[x], pts[y]);
        return x < y;
      });
      for (std::size_t j = 0; j < k; ++j) {
        if (nb.row(i)[j] != order[j]) return false;
      }
    }
    const auto fps = farthest_point_sample(pts, pts.size());
    if (std::set<std::size_t>(fps.begin(), fps.end()).size() != pts.size()) return false;
  }
  return true;
}

bool dataset_check(std::uint64_t seed) {
  SyntheticSceneConfig sc;
  sc.frames = 24;
  sc.points_per_frame = 400;
  const std::vector<SyntheticScene> scenes{make_scene("a", sc, Rng::mix(seed, 3))};
  const auto clouds = memory_clouds(scenes);
  const auto m = generate_dataset(to_sequences(scenes), clouds.loader(), {});
  for (const auto& s : m.scenes) {
    const std::set<std::string> keys(s.keyframes.begin(), s.keyframes.end());
    for (std::size_t i = 0; i < s.frames.size(); ++i) {
      if (keys.contains(s.frames[i].frame_id)) continue;
      bool covered = false;
      for (const auto& p : s.labels[i].positives) covered = covered || keys.contains(p);
      for (std::size_t j = 0; j < s.frames.size() && !covered; ++j) {
        const auto& pj = s.labels[j].positives;
        covered = keys.contains(s.frames[j].frame_id) &&
                  std::find(pj.begin(), pj.end(), s.frames[i].frame_id) != pj.end();
      }
      if (!covered) return false;
    }
  }
  PipelineConfig pc;
  pc.descriptors = DescriptorMode::kOracle;
  pc.reranker = RerankerKind::kNone;
  return evaluate(m, clouds.loader(), pc).recall_at.at(1) == 1.0;
}

}  // namespace

bool run_selftest(std::uint64_t seed, std::ostream& out) {
  const std::vector<std::pair<std::string, std::function<bool()>>> checks = {
      {"overlap vs voxel-set oracle", [&] { return overlap_check(seed); }},
      {"knn vs full sort, fps coverage", [&] { return sampling_check(seed); }},
      {"reranker gradients vs finite differences",
       [&] { return check_rerank_gradients(3, seed).max_error <= 1e-4; }},
      {"keyframes dominate, oracle recall@1 = 1", [&] { return dataset_check(seed); }},
  };
  bool all = true;
  for (const auto& [name, check] : checks) {
    const bool ok = check();
    all = all && ok;
    out << (ok ? "pass " : "FAIL ") << name << '\n';
  }
  return all;
}

}  // namespace cscpr::cli
