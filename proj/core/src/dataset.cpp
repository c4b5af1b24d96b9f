#include "cscpr/dataset.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include "cscpr/error.hpp"
#include "cscpr/parallel.hpp"
#include "cscpr/rng.hpp"

namespace cscpr {

void Thresholds::validate() const {
  if (!(t_n >= 0.0 && t_n < t_p && t_p <= 1.0)) {
    throw InvalidArgument("thresholds must satisfy 0 <= t_n < t_p <= 1");
  }
  if (!(t_c > 0.0 && t_c <= 1.0)) throw InvalidArgument("t_c must lie in (0, 1]");
}

CloudLoader pcb_loader(std::filesystem::path base_dir) {
  return [base = std::move(base_dir)](const FrameRecord& frame) {
    const auto path = frame.cloud_path.is_relative() && !base.empty()
                          ? base / frame.cloud_path
                          : frame.cloud_path;
    try {
      return read_pcb(path);
    } catch (const IoError& e) {
      throw IoError("frame " + frame.scene_id + "/" + frame.frame_id + ": " + e.what());
    }
  };
}

VoxelizedFrame voxelize_frame(const FrameRecord& frame, const CloudLoader& loader,
                              double voxel_size) {
  frame.pose.validate();
  const PointCloud cloud = loader(frame);
  return {frame, voxelize(transform(cloud, frame.pose), voxel_size)};
}

std::vector<std::size_t> select_database_indices(const std::vector<VoxelGrid>& sequence,
                                                 double t_c) {
  std::vector<std::size_t> kept;
  if (sequence.empty()) return kept;
  kept.push_back(0);
  for (std::size_t n = 1; n < sequence.size(); ++n) {
    if (voxel_iou(sequence[kept.back()], sequence[n]) < t_c) kept.push_back(n);
  }
  return kept;
}

std::vector<FrameRecord> select_database_frames(const std::vector<FrameRecord>& sequence,
                                                const CloudLoader& loader, double t_c,
                                                double voxel_size) {
  if (sequence.empty()) throw InvalidArgument("select_database_frames: empty sequence");
  std::vector<VoxelGrid> grids;
  grids.reserve(sequence.size());
  for (const auto& frame : sequence) grids.push_back(voxelize_frame(frame, loader, voxel_size).grid);
  std::vector<FrameRecord> out;
  for (std::size_t i : select_database_indices(grids, t_c)) out.push_back(sequence[i]);
  return out;
}

namespace {

// Partial Fisher-Yates; keeps the chosen candidates in their original order.
std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t cap, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (n <= cap) return idx;
  for (std::size_t i = 0; i < cap; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(cap);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace

std::vector<std::vector<FrameLabels>> label_pairs(
    const std::vector<std::vector<VoxelizedFrame>>& scenes, const Thresholds& thresholds,
    const LabelOptions& options) {
  thresholds.validate();

  struct Slot {
    std::size_t scene;
    std::size_t frame;
  };
  std::vector<Slot> queries;
  std::vector<std::vector<FrameLabels>> labels(scenes.size());
  for (std::size_t s = 0; s < scenes.size(); ++s) {
    labels[s].resize(scenes[s].size());
    for (std::size_t f = 0; f < scenes[s].size(); ++f) queries.push_back({s, f});
  }

  parallel_for(queries.size(), options.threads, [&](std::size_t qi) {
    const auto [s, f] = queries[qi];
    const VoxelizedFrame& query = scenes[s][f];
    FrameLabels out;
    std::vector<FrameRef> negatives;
    for (std::size_t s2 = 0; s2 < scenes.size(); ++s2) {
      for (std::size_t f2 = 0; f2 < scenes[s2].size(); ++f2) {
        if (s2 == s && f2 == f) continue;
        const FrameRecord& rec = scenes[s2][f2].record;
        if (s2 != s) {
          negatives.push_back({rec.scene_id, rec.frame_id});
          continue;
        }
        const double coverage = voxel_coverage(query.grid, scenes[s2][f2].grid);
        if (coverage > thresholds.t_p) {
          out.positives.push_back(rec.frame_id);
        } else if (coverage <= thresholds.t_n) {
          negatives.push_back({rec.scene_id, rec.frame_id});
        }
      }
    }
    Rng rng(options.seed, qi);
    for (std::size_t k : sample_without_replacement(negatives.size(), options.negative_cap, rng)) {
      out.negatives.push_back(negatives[k]);
    }
    labels[s][f] = std::move(out);
  });
  return labels;
}

std::vector<std::size_t> greedy_dominating_set(const std::vector<std::vector<std::size_t>>& adj,
                                               const std::vector<std::string>& names) {
  const std::size_t n = adj.size();
  std::vector<std::size_t> by_name(n);
  std::iota(by_name.begin(), by_name.end(), std::size_t{0});
  std::stable_sort(by_name.begin(), by_name.end(),
                   [&](std::size_t a, std::size_t b) { return names[a] < names[b]; });

  std::vector<bool> covered(n, false);
  std::vector<bool> chosen(n, false);
  std::size_t remaining = n;
  std::vector<std::size_t> picks;
  while (remaining > 0) {
    std::size_t best = n;
    std::size_t best_gain = 0;
    for (std::size_t v : by_name) {
      if (chosen[v]) continue;
      std::size_t gain = covered[v] ? 0 : 1;
      for (std::size_t u : adj[v]) gain += covered[u] ? 0 : 1;
      if (gain > best_gain) {
        best_gain = gain;
        best = v;
      }
    }
    chosen[best] = true;
    picks.push_back(best);
    if (!covered[best]) {
      covered[best] = true;
      --remaining;
    }
    for (std::size_t u : adj[best]) {
      if (!covered[u]) {
        covered[u] = true;
        --remaining;
      }
    }
  }
  return picks;
}

std::vector<std::string> extract_keyframes(const std::vector<FrameRecord>& frames,
                                           const std::vector<FrameLabels>& labels) {
  if (frames.size() != labels.size()) {
    throw InvalidArgument("extract_keyframes: labels are not aligned with frames");
  }
  std::map<std::string, std::size_t> index;
  std::vector<std::string> names;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    index.emplace(frames[i].frame_id, i);
    names.push_back(frames[i].frame_id);
  }
  std::vector<std::vector<std::size_t>> adj(frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) {
    for (const auto& p : labels[i].positives) {
      const auto it = index.find(p);
      if (it == index.end()) throw InvalidArgument("extract_keyframes: unknown positive " + p);
      if (it->second == i) continue;
      adj[i].push_back(it->second);
      adj[it->second].push_back(i);
    }
  }
  for (auto& a : adj) {
    std::sort(a.begin(), a.end());
    a.erase(std::unique(a.begin(), a.end()), a.end());
  }
  std::vector<std::string> out;
  for (std::size_t v : greedy_dominating_set(adj, names)) out.push_back(names[v]);
  return out;
}

}  // namespace cscpr
