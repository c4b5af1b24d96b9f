// Acceptance suite. One PASS/FAIL line per criterion; `--only N` runs one.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cli.hpp"
#include "cscpr/cscc.hpp"
#include "cscpr/dataset.hpp"
#include "cscpr/extractor.hpp"
#include "cscpr/gradient_check.hpp"
#include "cscpr/manifest.hpp"
#include "cscpr/model.hpp"
#include "cscpr/pipeline.hpp"
#include "cscpr/sampling.hpp"
#include "cscpr/scc.hpp"
#include "cscpr/synthetic.hpp"
#include "cscpr/toy_train.hpp"
#include "cscpr/voxel.hpp"
#include "oracles.hpp"

using namespace cscpr;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

PointCloud cloud_of(const std::vector<Vec3>& positions) {
  std::vector<Point> pts(positions.size());
  for (std::size_t i = 0; i < pts.size(); ++i) pts[i].position = positions[i];
  return PointCloud(std::move(pts));
}

PointCloud random_cloud(Rng& rng, std::size_t n) {
  std::vector<Point> pts(n);
  for (auto& p : pts) {
    p.position = {rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(0, 3)};
    p.color = {rng.uniform(), rng.uniform(), rng.uniform()};
    p.normal = Vec3(rng.normal(), rng.normal(), rng.normal()).normalized();
  }
  return PointCloud(std::move(pts));
}

template <class T>
void shuffle(Rng& rng, std::vector<T>& v) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
}

std::vector<double> flat(const Matrix& m) { return {m.data(), m.data() + m.size()}; }

std::vector<double> flat(const std::vector<std::vector<double>>& rows) {
  std::vector<double> out;
  for (const auto& r : rows) out.insert(out.end(), r.begin(), r.end());
  return out;
}

// Undirected positive graph over one scene's database frames.
std::vector<std::vector<std::size_t>> positive_graph(const SceneEntry& s) {
  std::map<std::string, std::size_t> at;
  for (std::size_t i = 0; i < s.frames.size(); ++i) at[s.frames[i].frame_id] = i;
  std::vector<std::vector<std::size_t>> adj(s.frames.size());
  for (std::size_t i = 0; i < s.frames.size(); ++i) {
    for (const auto& p : s.labels[i].positives) {
      adj[i].push_back(at.at(p));
      adj[at.at(p)].push_back(i);
    }
  }
  return adj;
}

// 1 ------------------------------------------------------------------------

Outcome overlap_oracle() {
  constexpr std::size_t kPairs = 1000;
  constexpr double kBudget = 30.0;
  Stopwatch sw;
  Rng rng(101);
  const double sizes[] = {0.05, 0.1, 0.2, 0.35};
  std::size_t mismatches = 0, nonzero = 0;
  for (std::size_t t = 0; t < kPairs; ++t) {
    const std::size_t na = 1 + rng.below(200), nb = 1 + rng.below(200);
    auto a = rng.below(2) ? oracle::random_positions(rng, na, 0.6) : oracle::lattice_positions(rng, na, 6);
    std::vector<Vec3> b;
    // Half the second cloud is a jittered copy of the first, so overlaps are rarely zero.
    for (std::size_t i = 0; i < nb; ++i) {
      if (i % 2 == 0) {
        b.push_back(a[rng.below(na)] + Vec3(rng.normal(), rng.normal(), rng.normal()) * 0.03);
      } else {
        b.push_back({rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8)});
      }
    }
    const Pose pa = oracle::random_pose(rng, 0.2);
    // Second pose: the first, nudged, so the clouds still meet in the world frame.
    Pose pb = pa;
    pb.translation += Vec3(rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1));
    const double vs = sizes[rng.below(4)];

    const auto ca = cloud_of(a), cb = cloud_of(b);
    const auto sa = oracle::voxel_set(a, pa, vs), sb = oracle::voxel_set(b, pb, vs);
    const double sym = symmetric_frame_overlap(ca, cb, pa, pb, vs);
    const double ab = asymmetric_overlap(ca, cb, pa, pb, vs);
    const double ba = asymmetric_overlap(cb, ca, pb, pa, vs);
    mismatches += (sym != oracle::iou(sa, sb)) + (ab != oracle::coverage(sa, sb)) + (ba != oracle::coverage(sb, sa));
    nonzero += sym > 0;
  }
  const double s = sw.seconds();
  return {mismatches == 0 && s <= kBudget,
          fmt("%zu pairs (%zu overlapping), %zu mismatches, %.2f s (limit %.0f s)", kPairs, nonzero, mismatches, s,
              kBudget)};
}

// 2 ------------------------------------------------------------------------

Outcome fps_knn_oracle() {
  constexpr std::size_t kTrials = 500;
  Rng rng(202);
  std::size_t fps_bad = 0, knn_bad = 0, rows = 0;
  for (std::size_t t = 0; t < kTrials; ++t) {
    const std::size_t n = 1 + rng.below(12);
    const auto p = t % 2 ? oracle::random_positions(rng, n, 1.0) : oracle::lattice_positions(rng, n, 3);
    const std::size_t m = 1 + rng.below(n);
    fps_bad += farthest_point_sample(std::span<const Vec3>(p), m) != oracle::fps(p, m);
  }
  for (std::size_t t = 0; t < kTrials; ++t) {
    const std::size_t n = 1 + rng.below(200);
    const auto base = t % 2 ? oracle::random_positions(rng, n, 1.0) : oracle::lattice_positions(rng, n, 5);
    const std::size_t nq = 1 + rng.below(8);
    std::vector<Vec3> q;
    for (std::size_t i = 0; i < nq; ++i) {
      q.push_back(rng.below(2) ? base[rng.below(n)] : Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)));
    }
    const std::size_t k = 1 + rng.below(n);
    const auto table = knn(q, base, k);
    for (std::size_t r = 0; r < nq; ++r, ++rows) {
      const auto got = table.row(r);
      knn_bad += !std::ranges::equal(got, oracle::knn_row(q[r], base, k));
    }
  }
  return {fps_bad == 0 && knn_bad == 0,
          fmt("FPS %zu/%zu trials disagree (N<=12); KNN %zu/%zu query rows disagree over %zu trials (N<=200)",
              fps_bad, kTrials, knn_bad, rows, kTrials)};
}

// 3 ------------------------------------------------------------------------

Outcome kernel_invariants() {
  constexpr std::size_t kInstances = 200;
  Rng rng(303);
  std::size_t range_bad = 0, column_bad = 0, empty_bad = 0, empty_seen = 0, mask_bad = 0, perm_bad = 0,
              desc_bad = 0;

  // Sigmoid range, one owner per column, empty-sum identity, permutation invariance of SCC.
  std::size_t attempts = 0;
  for (std::size_t t = 0; t < kInstances || empty_seen < kInstances; ++t, ++attempts) {
    if (attempts > 20 * kInstances) break;
    const std::size_t n = 4 + rng.below(47);
    const std::size_t m = std::max<std::size_t>(1, n / 2 + rng.below(n / 2 + 1));
    const auto x = oracle::random_features(rng, n, 3 + rng.below(4));
    const auto p = oracle::random_scc(rng, x.dim(), 4, 3, m);
    SCCTrace tr;
    const auto out = scc_forward(x, p, &tr);
    const auto M = tr.sim.rows(), N = tr.sim.cols();

    if (t < kInstances) {
      for (Eigen::Index i = 0; i < tr.sim.size(); ++i) {
        const double s = tr.sim.data()[i];
        range_bad += !(s > 0.0 && s < 1.0);
      }
      for (Eigen::Index j = 0; j < N; ++j) {
        std::size_t nonzero = 0;
        Eigen::Index best = 0;
        for (Eigen::Index i = 0; i < M; ++i) {
          const double hat = tr.owner[static_cast<std::size_t>(j)] == static_cast<std::size_t>(i) ? tr.sim(i, j) : 0.0;
          nonzero += hat != 0.0;
          if (tr.sim(i, j) > tr.sim(best, j)) best = i;
        }
        column_bad += nonzero != 1 || tr.owner[static_cast<std::size_t>(j)] != static_cast<std::size_t>(best);
      }

      auto idx = std::vector<std::size_t>(n);
      std::iota(idx.begin(), idx.end(), std::size_t{0});
      shuffle(rng, idx);
      FeatureMatrix y;
      y.values.resize(x.values.rows(), x.values.cols());
      y.positions.resize(n);
      for (std::size_t r = 0; r < n; ++r) {
        y.values.row(static_cast<Eigen::Index>(r)) = x.values.row(static_cast<Eigen::Index>(idx[r]));
        y.positions[r] = x.positions[idx[r]];
      }
      const auto again = scc_forward(y, p);
      perm_bad += again.values != out.values || again.positions != out.positions;
    }

    bool had_empty = false;
    for (Eigen::Index i = 0; i < M; ++i) {
      bool owns = false;
      for (std::size_t j = 0; j < static_cast<std::size_t>(N); ++j) owns = owns || tr.owner[j] == static_cast<std::size_t>(i);
      if (owns) continue;
      had_empty = true;
      empty_bad += tr.enhanced.row(i) != tr.center_src.row(i);
    }
    empty_seen += had_empty;
  }

  // CSCC: sigmoid range on C and the score, masked pairs contribute nothing.
  for (std::size_t t = 0; t < kInstances; ++t) {
    const std::size_t mq = 1 + rng.below(12), md = 2 + rng.below(12), dc = 2 + rng.below(6);
    const auto q = oracle::random_centers(rng, mq, dc);
    const auto d = oracle::random_centers(rng, md, dc);
    // Fewer kept pairs than db centers, so some columns are fully masked.
    const auto p = oracle::random_cscc(rng, dc, 2 + rng.below(6), 1 + rng.below(md - 1));
    CSCCTrace tr;
    const double score = cscc_forward(q, d, p, &tr);
    range_bad += !(score > 0.0 && score < 1.0);
    for (Eigen::Index i = 0; i < tr.corr.size(); ++i) range_bad += !(tr.corr.data()[i] > 0.0 && tr.corr.data()[i] < 1.0);

    std::vector<double> mass(md, 0.0);
    std::vector<bool> kept_col(md, false);
    for (const auto& [i, j] : tr.kept) {
      mass[j] += tr.corr(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      kept_col[j] = true;
    }
    for (std::size_t j = 0; j < md; ++j) {
      if (kept_col[j]) continue;
      mask_bad += !tr.inner.row(static_cast<Eigen::Index>(j)).isZero(0.0) || tr.col_mass(static_cast<Eigen::Index>(j)) != 0.0;
    }
    // Moving a fully masked db center far along its own direction leaves C's ranking and every kept term as is.
    for (std::size_t j = 0; j < md; ++j) {
      if (kept_col[j]) continue;
      auto d2 = d;
      d2.values.row(static_cast<Eigen::Index>(j)) *= 3.0;
      CSCCTrace tr2;
      const double again = cscc_forward(q, d2, p, &tr2);
      mask_bad += tr2.kept != tr.kept || std::abs(again - score) > 1e-12;
      break;
    }
  }

  // Global descriptor permutation invariance.
  ExtractorConfig tiny;
  tiny.layers = {{8, 40, 12, 6, 4}, {8, 16, 6, 4, 3}};
  tiny.descriptor_dim = 16;
  tiny.rerank_layer = 0;
  for (std::size_t t = 0; t < kInstances; ++t) {
    const auto w = ExtractorWeights::init(tiny, rng.next());
    const auto cloud = random_cloud(rng, 40 + rng.below(41));
    auto pts = std::vector<Point>(cloud.points().begin(), cloud.points().end());
    shuffle(rng, pts);
    desc_bad += extract_features(cloud, tiny, w).descriptor != extract_features(PointCloud(pts), tiny, w).descriptor;
  }

  const std::size_t violations = range_bad + column_bad + empty_bad + mask_bad + perm_bad + desc_bad;
  return {violations == 0 && empty_seen >= kInstances,
          fmt("%zu instances per property; violations: sigmoid range %zu, one-owner columns %zu, empty-sum %zu "
              "(over %zu instances with empty centers), masked pairs %zu, SCC permutation %zu, descriptor "
              "permutation %zu",
              kInstances, range_bad, column_bad, empty_bad, empty_seen, mask_bad, perm_bad, desc_bad)};
}

// 4 ------------------------------------------------------------------------

Outcome naive_parity() {
  constexpr std::size_t kInstances = 100;
  constexpr double kTol = 1e-12;
  Rng rng(404);
  double scc_worst = 0, cscc_worst = 0;
  for (std::size_t t = 0; t < kInstances; ++t) {
    const std::size_t n = 1 + rng.below(50);
    const std::size_t m = 1 + rng.below(n);
    const auto x = oracle::random_features(rng, n, 2 + rng.below(7));
    const auto p = oracle::random_scc(rng, x.dim(), 2 * (1 + rng.below(4)), 1 + rng.below(6), m);
    const auto got = scc_forward(x, p);
    const auto want = oracle::scc(x, p);
    scc_worst = std::max(scc_worst, oracle::rel_err(flat(got.values), flat(want.out)));
    if (got.positions != want.positions) scc_worst = std::max(scc_worst, 1.0);
  }
  for (std::size_t t = 0; t < kInstances; ++t) {
    const std::size_t mq = 1 + rng.below(50), md = 1 + rng.below(50), dc = 1 + rng.below(8);
    const auto q = oracle::random_centers(rng, mq, dc);
    const auto d = oracle::random_centers(rng, md, dc);
    const auto p = oracle::random_cscc(rng, dc, 1 + rng.below(8), 1 + rng.below(mq * md));
    CSCCTrace tr;
    const double got = cscc_forward(q, d, p, &tr);
    const auto want = oracle::cscc(q.values, d.values, p);
    cscc_worst = std::max({cscc_worst, oracle::rel_err({got}, {want.score}),
                           oracle::rel_err({tr.fused.data(), tr.fused.data() + tr.fused.size()}, want.fused)});
  }
  return {scc_worst <= kTol && cscc_worst <= kTol,
          fmt("%zu instances each, N<=50: scc_forward rel err %.3e, cscc_forward rel err %.3e (limit %.0e)",
              kInstances, scc_worst, cscc_worst, kTol)};
}

// 5 ------------------------------------------------------------------------

Outcome gradients() {
  constexpr std::size_t kInstances = 20;
  constexpr double kTol = 1e-4, kBudget = 120.0;
  Stopwatch sw;
  const auto rep = check_rerank_gradients(kInstances, 0);
  const double s = sw.seconds();
  std::string worst;
  double w = -1;
  for (const auto& [name, e] : rep.block_max_error) {
    if (e > w) {
      w = e;
      worst = name;
    }
  }
  return {rep.instances == kInstances && rep.max_error <= kTol && s <= kBudget,
          fmt("%zu instances, %zu blocks, %zu coordinates: max rel err %.3e in %s (limit %.0e), %.1f s (limit %.0f s)",
              rep.instances, rep.block_max_error.size(), rep.coordinates, rep.max_error, worst.c_str(), kTol, s,
              kBudget)};
}

// 6 ------------------------------------------------------------------------

Outcome toy_overfit() {
  constexpr double kAbs = 0.1, kRel = 0.2, kBudget = 300.0;
  Stopwatch sw;
  const auto econfig = ExtractorConfig::small();
  const auto data = make_toy_dataset(0, econfig);
  TrainConfig tc;  // 200 steps, cosine 1e-4 -> 1e-7, seed 0
  auto run = [&] {
    Model model = Model::init(econfig, RerankDims::for_extractor(econfig), 0);
    const double before = rerank_objective(data, model.rerank, false).loss;
    toy_train(data, model.rerank, tc);
    return std::pair{before, rerank_objective(data, model.rerank, false).loss};
  };
  const auto [initial, final_ce] = run();
  const auto [initial2, final2] = run();
  const double s = sw.seconds();
  const bool deterministic = initial == initial2 && final_ce == final2;
  return {data.pairs.size() == 10 && tc.steps == 200 && final_ce < kAbs && final_ce < kRel * initial &&
              deterministic && s <= kBudget,
          fmt("%zu pairs, %zu steps, lr %.0e -> %.0e: cross-entropy %.6f -> %.6f (need < %.1f and < %.6f), "
              "deterministic %s, %.1f s for two runs (limit %.0f s per run)",
              data.pairs.size(), tc.steps, tc.lr_max, tc.lr_min, initial, final_ce, kAbs, kRel * initial,
              deterministic ? "yes" : "no", s, kBudget)};
}

// 7 ------------------------------------------------------------------------

Outcome dataset_contract() {
  constexpr double kTc = 0.5;
  constexpr std::size_t kGraphs = 200;
  SyntheticSceneConfig sc;
  sc.frames = 50;
  std::vector<SyntheticScene> scenes{make_scene("trajectory", sc, 7)};
  sc.room.extent = {6.0, 4.0, 2.8};
  scenes.push_back(make_scene("wide", sc, 8));
  sc.room.extent = {3.0, 3.0, 2.4};
  sc.turns = 2.0;
  scenes.push_back(make_scene("tight", sc, 9));
  const auto clouds = memory_clouds(scenes);
  GenerationConfig gc;
  const auto m = generate_dataset(to_sequences(scenes), clouds.loader(), gc);

  std::size_t adjacent = 0, too_close = 0, undominated = 0;
  double worst = 0;
  const auto load = clouds.loader();
  const auto& traj = m.scenes[0];
  for (std::size_t i = 1; i < traj.frames.size(); ++i) {
    const double o = symmetric_frame_overlap(load(traj.frames[i - 1]), load(traj.frames[i]), traj.frames[i - 1].pose,
                                             traj.frames[i].pose, gc.voxel_size);
    worst = std::max(worst, o);
    too_close += !(o < kTc);
    ++adjacent;
  }
  for (const auto& s : m.scenes) {
    std::map<std::string, std::size_t> at;
    for (std::size_t i = 0; i < s.frames.size(); ++i) at[s.frames[i].frame_id] = i;
    std::vector<std::size_t> keys;
    for (const auto& k : s.keyframes) keys.push_back(at.at(k));
    undominated += !oracle::dominates(positive_graph(s), keys);
  }

  Rng rng(707);
  std::size_t invalid = 0;
  for (std::size_t t = 0; t < kGraphs; ++t) {
    const std::size_t n = 1 + rng.below(15);
    const double p = rng.uniform(0.05, 0.6);
    std::vector<std::vector<std::size_t>> adj(n);
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = a + 1; b < n; ++b) {
        if (rng.uniform() < p) {
          adj[a].push_back(b);
          adj[b].push_back(a);
        }
      }
    }
    std::vector<std::string> names(n);
    for (std::size_t i = 0; i < n; ++i) names[i] = fmt("v%02zu", i);
    const auto set = greedy_dominating_set(adj, names);
    const bool unique = std::set<std::size_t>(set.begin(), set.end()).size() == set.size();
    invalid += !oracle::dominates(adj, set) || !unique || set.size() < oracle::min_dominating_size(adj);
  }

  return {adjacent > 0 && too_close == 0 && undominated == 0 && invalid == 0,
          fmt("50-frame trajectory: %zu database frames, %zu adjacent pairs at or above %.1f (max %.3f); keyframes "
              "fail to dominate on %zu of %zu scenes; %zu of %zu random graphs (<=15 vertices) fail the brute-force check",
              traj.frames.size(), too_close, kTc, worst, undominated, m.scenes.size(), invalid, kGraphs)};
}

// 8 ------------------------------------------------------------------------

Outcome end_to_end_recall() {
  SyntheticSceneConfig sc;
  sc.frames = 30;
  sc.points_per_frame = 512;
  std::vector<SyntheticScene> scenes{make_scene("a", sc, 11), make_scene("b", sc, 12)};
  sc.room.extent = {5.0, 3.5, 2.6};
  scenes.push_back(make_scene("c", sc, 13));
  const auto clouds = memory_clouds(scenes);
  const auto m = generate_dataset(to_sequences(scenes), clouds.loader(), {});

  PipelineConfig oc;
  oc.descriptors = DescriptorMode::kOracle;
  oc.reranker = RerankerKind::kNone;
  const auto oracle_report = evaluate(m, clouds.loader(), oc);
  const double oracle_r1 = oracle_report.recall_at.at(1);

  double kabsch_r1 = 1.0;
  std::size_t kabsch_queries = 0;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto pack = make_rigid_query_pack({}, seed);
    PipelineConfig kc;
    kc.descriptors = DescriptorMode::kRandom;
    kc.reranker = RerankerKind::kKabsch;
    kc.top_r = pack.manifest.scenes[0].keyframes.size();
    kc.seed = seed;
    const auto r = evaluate(pack.manifest, pack.clouds.loader(), kc);
    kabsch_r1 = std::min(kabsch_r1, r.evaluated > 0 ? r.recall_at.at(1) : 0.0);
    kabsch_queries += r.evaluated;
  }

  std::size_t runs = 0, set_bad = 0, monotone_bad = 0, checked = 0;
  const auto econfig = ExtractorConfig::small();
  for (std::uint64_t seed : {0u, 1u, 2u}) {
    const Model model = Model::init(econfig, RerankDims::for_extractor(econfig), seed);
    PipelineConfig cc;
    cc.descriptors = DescriptorMode::kNetwork;
    cc.reranker = RerankerKind::kCscc;
    cc.top_r = 5;
    cc.recall_ks = {1, 2, 3, 5, 10};
    cc.seed = seed;
    const auto r = evaluate(m, clouds.loader(), cc, &model);
    ++runs;
    for (const auto& q : r.results) {
      std::multiset<std::string> a, b;
      for (const auto& c : q.retrieved.candidates) a.insert(c.frame_id);
      for (const auto& c : q.reranked.candidates) b.insert(c.frame_id);
      set_bad += a != b;
      ++checked;
    }
    double prev = 0;
    for (const auto& [k, v] : r.recall_at) {
      monotone_bad += v < prev;
      prev = v;
    }
  }

  return {oracle_r1 == 1.0 && oracle_report.evaluated > 0 && kabsch_r1 == 1.0 && kabsch_queries > 0 &&
              set_bad == 0 && monotone_bad == 0 && checked > 0,
          fmt("oracle R@1 %.4f over %zu queries; Kabsch R@1 %.4f (min over 3 rigid packs, %zu queries); seeded CSCC: "
              "%zu runs, %zu of %zu candidate sets changed, %zu recall decreases",
              oracle_r1, oracle_report.evaluated, kabsch_r1, kabsch_queries, runs, set_bad, checked, monotone_bad)};
}

// 9 ------------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

int cli(std::vector<std::string> args, std::string* err_text = nullptr) {
  args.insert(args.begin(), "cscpr");
  std::ostringstream out, err;
  const int code = cli::run_subcommand(args, out, err);
  if (err_text) *err_text = err.str();
  return code;
}

Outcome reproducible_reports() {
  const fs::path dir = fs::temp_directory_path() / "cscpr_acceptance_repro";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string scenes = (dir / "scenes").string(), manifest = (dir / "manifest.json").string(),
                    report = (dir / "report.json").string();
  std::string err;
  if (cli({"synth", "--out", scenes, "--scenes", "2", "--frames", "20", "--points", "512", "--seed", "4"}, &err) != 0 ||
      cli({"gen-dataset", "--scenes", scenes, "--out", manifest}, &err) != 0) {
    return {false, "could not build the dataset: " + err};
  }
  const std::vector<std::string> eval{"evaluate", "--manifest", manifest, "--extractor", "small",
                                      "--descriptors", "network", "--reranker", "cscc", "--seed", "5",
                                      "--out", report};
  auto run = [&](bool timing) {
    auto args = eval;
    if (!timing) args.push_back("--no-timing");
    if (cli(args, &err) != 0) return std::string();
    return slurp(report);
  };
  auto strip = [](const std::string& text) {
    auto j = nlohmann::ordered_json::parse(text);
    j.erase("timing_ms");
    return j.dump(2);
  };
  const std::string a = run(true), b = run(true);
  if (a.empty() || b.empty()) return {false, "evaluate failed: " + err};
  const bool timed_equal = strip(a) == strip(b);
  const bool had_timing = nlohmann::json::parse(a).contains("timing_ms");
  const std::string c = run(false), d = run(false);
  const bool raw_equal = !c.empty() && c == d;
  fs::remove_all(dir);
  return {timed_equal && raw_equal && had_timing,
          fmt("two timed reports identical after dropping timing_ms: %s; two --no-timing reports byte-identical: %s "
              "(%zu bytes)",
              timed_equal ? "yes" : "no", raw_equal ? "yes" : "no", c.size())};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance suite"};
  int only = 0;
  app.add_option("--only", only, "Run a single criterion (1-9)")->check(CLI::Range(1, 9));
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> all{
      {1, "overlap-oracle", overlap_oracle},     {2, "fps-knn-oracle", fps_knn_oracle},
      {3, "kernel-invariants", kernel_invariants}, {4, "naive-parity", naive_parity},
      {5, "gradient-check", gradients},          {6, "toy-overfit", toy_overfit},
      {7, "dataset-contract", dataset_contract}, {8, "end-to-end-recall", end_to_end_recall},
      {9, "reproducibility", reproducible_reports},
  };
  bool ok = true;
  for (const auto& c : all) {
    if (only != 0 && c.id != only) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::cout << "criterion " << c.id << ' ' << c.name << ' ' << (o.pass ? "PASS" : "FAIL") << "  " << o.detail
              << std::endl;
    ok = ok && o.pass;
  }
  return ok ? 0 : 1;
}
