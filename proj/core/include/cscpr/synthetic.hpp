#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "cscpr/dataset.hpp"
#include "cscpr/extractor.hpp"
#include "cscpr/manifest.hpp"
#include "cscpr/point_cloud.hpp"
#include "cscpr/toy_train.hpp"

namespace cscpr {

class Rng;

/// Box-shaped room of textured colored planes with a few boxes on the floor.
struct RoomConfig {
  Vec3 extent{4.0, 3.0, 2.5};
  std::size_t boxes = 3;
  double density = 500.0;  // surface points per square meter
};

/// Camera on a circle around the room center looking outward.
struct SyntheticSceneConfig {
  RoomConfig room;
  std::size_t frames = 50;
  std::size_t points_per_frame = 1024;
  double turns = 1.25;
  double radius = 0.6;
  double height = 1.3;
  double half_fov_x = 0.6;  // radians
  double half_fov_y = 0.45;
  double near = 0.2;
  double far = 6.0;
};

struct SyntheticScene {
  std::string scene_id;
  std::vector<FrameRecord> frames;
  std::vector<PointCloud> clouds;  // camera frame, aligned with frames
};

/// World-frame surface samples of a room.
PointCloud make_room(const RoomConfig& config, Rng& rng);

/// Points inside the camera frustum, expressed in the camera frame (z forward,
/// x right, y down), randomly thinned to at most `max_points`.
PointCloud frustum_crop(const PointCloud& world, const Pose& camera,
                        const SyntheticSceneConfig& config, std::size_t max_points, Rng& rng);

/// Camera-to-world pose at `position` looking along the horizontal heading `yaw`.
Pose camera_pose(const Vec3& position, double yaw);

SyntheticScene make_scene(const std::string& scene_id, const SyntheticSceneConfig& config,
                          std::uint64_t seed);

/// Writes `<dir>/<scene>/frame_XXXX.pcb` plus a trajectory.json per scene.
void write_scene_pack(const std::vector<SyntheticScene>& scenes, const std::filesystem::path& dir);

std::vector<SceneSequence> to_sequences(const std::vector<SyntheticScene>& scenes);

/// Clouds held in memory, keyed by "scene/frame".
struct MemoryClouds {
  std::map<std::string, PointCloud> clouds;

  void add(const FrameRecord& frame, PointCloud cloud);
  CloudLoader loader() const;
};

MemoryClouds memory_clouds(const std::vector<SyntheticScene>& scenes);

/// A manifest whose queries are each a rigid transform of exactly one keyframe,
/// with a fraction of the query points jittered.
struct RigidQueryPack {
  DatasetManifest manifest;
  MemoryClouds clouds;
};

struct RigidQueryConfig {
  std::size_t keyframes = 8;
  std::size_t points_per_frame = 600;
  double max_rotation = 0.35;     // radians
  double max_translation = 0.5;   // meters
  double noise_fraction = 0.1;    // share of jittered query points
  double noise_sigma = 0.02;      // meters
};

RigidQueryPack make_rigid_query_pack(const RigidQueryConfig& config, std::uint64_t seed);

/// Ten labeled pairs (five queries, one positive and one negative each) from
/// two synthetic rooms, encoded by a frozen seeded extractor.
ToyDataset make_toy_dataset(std::uint64_t seed, const ExtractorConfig& config = ExtractorConfig::small());

}  // namespace cscpr
