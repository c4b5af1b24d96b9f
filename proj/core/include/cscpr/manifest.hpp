#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cscpr/dataset.hpp"

namespace cscpr {

inline constexpr const char* kManifestSchema = "ipr-manifest/1";

struct GenerationConfig {
  Thresholds thresholds;
  double voxel_size = kDefaultOverlapVoxel;
  std::size_t negative_cap = 100;
  std::uint64_t seed = 0;

  friend bool operator==(const GenerationConfig&, const GenerationConfig&) = default;
};

struct SceneEntry {
  std::string scene_id;
  std::vector<FrameRecord> frames;
  std::vector<FrameLabels> labels;  // aligned with frames
  std::vector<std::string> keyframes;
  /// Non-keyframes whose positive list holds no keyframe.
  std::vector<std::string> unreachable;

  friend bool operator==(const SceneEntry&, const SceneEntry&) = default;
};

struct DatasetManifest {
  std::string split = "test";
  GenerationConfig config;
  std::vector<SceneEntry> scenes;

  /// Every violated invariant, empty when the manifest is valid.
  std::vector<std::string> validation_issues() const;
  void validate() const;  // throws ValidationError

  const FrameRecord* find(const FrameRef& ref) const;

  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

nlohmann::ordered_json manifest_to_json(const DatasetManifest& manifest);
DatasetManifest manifest_from_json(const nlohmann::json& j);

/// Validates, then writes UTF-8 JSON with a fixed key order.
void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);
DatasetManifest read_manifest(const std::filesystem::path& path);

nlohmann::ordered_json pose_to_json(const Pose& pose);
Pose pose_from_json(const nlohmann::json& j);

/// Frames of one capture sequence, in capture order.
struct SceneSequence {
  std::string scene_id;
  std::vector<FrameRecord> frames;
};

/// Database selection, pair labeling and keyframe extraction for all scenes.
DatasetManifest generate_dataset(const std::vector<SceneSequence>& sequences,
                                 const CloudLoader& loader, const GenerationConfig& config,
                                 const std::string& split = "test", std::size_t threads = 1);

/// Reads `<dir>/<scene>/trajectory.json` for every scene directory (sorted).
std::vector<SceneSequence> read_scene_directory(const std::filesystem::path& dir);
void write_trajectory(const SceneSequence& sequence, const std::filesystem::path& scene_dir);

}  // namespace cscpr
