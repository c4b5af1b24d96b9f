#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cscpr/geometry.hpp"
#include "cscpr/point_cloud.hpp"
#include "cscpr/voxel.hpp"

namespace cscpr {

struct FrameRecord {
  std::string frame_id;
  std::string scene_id;
  std::filesystem::path cloud_path;
  Pose pose;
  std::optional<std::filesystem::path> semantic_path;

  friend bool operator==(const FrameRecord&, const FrameRecord&) = default;
};

/// Reference to a frame anywhere in the dataset.
struct FrameRef {
  std::string scene_id;
  std::string frame_id;

  std::string key() const { return scene_id + "/" + frame_id; }
  friend auto operator<=>(const FrameRef&, const FrameRef&) = default;
};

/// Directed labels of one query frame.
struct FrameLabels {
  std::vector<std::string> positives;  // same scene
  std::vector<FrameRef> negatives;     // any scene

  friend bool operator==(const FrameLabels&, const FrameLabels&) = default;
};

struct Thresholds {
  double t_c = 0.5;  // database selection (symmetric IoU)
  double t_p = 0.3;  // positive: coverage > t_p
  double t_n = 0.0;  // negative: coverage <= t_n

  void validate() const;
  friend bool operator==(const Thresholds&, const Thresholds&) = default;
};

/// Loads the camera-frame cloud of a frame; throws IoError naming the frame.
using CloudLoader = std::function<PointCloud(const FrameRecord&)>;

/// Reads PCB1 files, resolving relative paths against `base_dir`.
CloudLoader pcb_loader(std::filesystem::path base_dir = {});

/// World-frame voxel set of one frame.
struct VoxelizedFrame {
  FrameRecord record;
  VoxelGrid grid;
};

VoxelizedFrame voxelize_frame(const FrameRecord& frame, const CloudLoader& loader,
                              double voxel_size);

/// Keeps the first frame, then every frame whose IoU with the last kept frame
/// is below t_c.
std::vector<FrameRecord> select_database_frames(const std::vector<FrameRecord>& sequence,
                                                const CloudLoader& loader, double t_c,
                                                double voxel_size);
std::vector<std::size_t> select_database_indices(const std::vector<VoxelGrid>& sequence,
                                                 double t_c);

struct LabelOptions {
  std::size_t negative_cap = 100;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
};

/// Labels every frame of every scene. Same-scene frames are positive when the
/// query's coverage exceeds t_p and negative when it is at most t_n; frames of
/// other scenes are negative. Output is indexed [scene][frame].
std::vector<std::vector<FrameLabels>> label_pairs(
    const std::vector<std::vector<VoxelizedFrame>>& scenes, const Thresholds& thresholds,
    const LabelOptions& options = {});

/// Greedy dominating set of the undirected positive graph; each round takes the
/// frame covering the most uncovered frames, ties by frame_id.
std::vector<std::string> extract_keyframes(const std::vector<FrameRecord>& frames,
                                           const std::vector<FrameLabels>& labels);

/// Same algorithm on an adjacency list; returns vertex indices in pick order.
/// `names` orders ties.
std::vector<std::size_t> greedy_dominating_set(const std::vector<std::vector<std::size_t>>& adj,
                                               const std::vector<std::string>& names);

}  // namespace cscpr
