#include "cscpr/manifest.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "cscpr/error.hpp"
#include "cscpr/parallel.hpp"

namespace cscpr {

using ordered_json = nlohmann::ordered_json;
using json = nlohmann::json;

namespace {

const std::set<std::string> kSplits = {"train", "val", "test"};

std::string join_ref(const std::string& scene, const std::string& frame) {
  return scene + "/" + frame;
}

template <typename T>
T field(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) {
    throw ValidationError({std::string("missing field '") + key + "'"});
  }
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ValidationError({std::string("bad field '") + key + "': " + e.what()});
  }
}

}  // namespace

ordered_json pose_to_json(const Pose& pose) {
  ordered_json rot = ordered_json::array();
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) rot.push_back(pose.rotation(r, c));
  }
  ordered_json t = ordered_json::array();
  for (int i = 0; i < 3; ++i) t.push_back(pose.translation(i));
  return ordered_json{{"rotation", rot}, {"translation", t}};
}

Pose pose_from_json(const json& j) {
  const auto rot = field<std::vector<double>>(j, "rotation");
  const auto t = field<std::vector<double>>(j, "translation");
  if (rot.size() != 9 || t.size() != 3) {
    throw ValidationError({"pose needs 9 rotation and 3 translation values"});
  }
  Pose pose;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) pose.rotation(r, c) = rot[static_cast<std::size_t>(3 * r + c)];
  }
  for (int i = 0; i < 3; ++i) pose.translation(i) = t[static_cast<std::size_t>(i)];
  return pose;
}

namespace {

ordered_json frame_to_json(const FrameRecord& f) {
  ordered_json j{{"frame_id", f.frame_id},
                 {"cloud_path", f.cloud_path.generic_string()},
                 {"pose", pose_to_json(f.pose)}};
  if (f.semantic_path) j["semantic_path"] = f.semantic_path->generic_string();
  return j;
}

FrameRecord frame_from_json(const json& j, const std::string& scene_id) {
  FrameRecord f;
  f.frame_id = field<std::string>(j, "frame_id");
  f.scene_id = scene_id;
  f.cloud_path = field<std::string>(j, "cloud_path");
  f.pose = pose_from_json(field<json>(j, "pose"));
  if (j.contains("semantic_path") && !j["semantic_path"].is_null()) {
    f.semantic_path = field<std::string>(j, "semantic_path");
  }
  return f;
}

}  // namespace

ordered_json manifest_to_json(const DatasetManifest& m) {
  ordered_json config{{"t_c", m.config.thresholds.t_c},
                      {"t_p", m.config.thresholds.t_p},
                      {"t_n", m.config.thresholds.t_n},
                      {"voxel_size", m.config.voxel_size},
                      {"negative_cap", m.config.negative_cap},
                      {"seed", m.config.seed}};
  ordered_json scenes = ordered_json::array();
  for (const auto& s : m.scenes) {
    ordered_json frames = ordered_json::array();
    for (const auto& f : s.frames) frames.push_back(frame_to_json(f));
    ordered_json labels = ordered_json::array();
    for (std::size_t i = 0; i < s.labels.size(); ++i) {
      ordered_json negs = ordered_json::array();
      for (const auto& n : s.labels[i].negatives) {
        negs.push_back(ordered_json{{"scene_id", n.scene_id}, {"frame_id", n.frame_id}});
      }
      labels.push_back(ordered_json{
          {"frame_id", i < s.frames.size() ? s.frames[i].frame_id : std::string()},
          {"positives", s.labels[i].positives},
          {"negatives", negs}});
    }
    scenes.push_back(ordered_json{{"scene_id", s.scene_id},
                                  {"frames", frames},
                                  {"labels", labels},
                                  {"keyframes", s.keyframes},
                                  {"unreachable", s.unreachable}});
  }
  return ordered_json{{"schema", kManifestSchema},
                      {"split", m.split},
                      {"config", config},
                      {"scenes", scenes}};
}

DatasetManifest manifest_from_json(const json& j) {
  const auto schema = field<std::string>(j, "schema");
  if (schema != kManifestSchema) {
    throw ValidationError({"unsupported manifest schema '" + schema + "'"});
  }
  DatasetManifest m;
  m.split = field<std::string>(j, "split");
  const json config = field<json>(j, "config");
  m.config.thresholds.t_c = field<double>(config, "t_c");
  m.config.thresholds.t_p = field<double>(config, "t_p");
  m.config.thresholds.t_n = field<double>(config, "t_n");
  m.config.voxel_size = field<double>(config, "voxel_size");
  m.config.negative_cap = field<std::size_t>(config, "negative_cap");
  m.config.seed = field<std::uint64_t>(config, "seed");

  for (const auto& js : field<json>(j, "scenes")) {
    SceneEntry s;
    s.scene_id = field<std::string>(js, "scene_id");
    for (const auto& jf : field<json>(js, "frames")) s.frames.push_back(frame_from_json(jf, s.scene_id));
    const json labels = field<json>(js, "labels");
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const json& jl = labels[i];
      if (i < s.frames.size() && field<std::string>(jl, "frame_id") != s.frames[i].frame_id) {
        throw ValidationError({"labels of scene " + s.scene_id + " are not aligned with frames"});
      }
      FrameLabels l;
      l.positives = field<std::vector<std::string>>(jl, "positives");
      for (const auto& jn : field<json>(jl, "negatives")) {
        l.negatives.push_back({field<std::string>(jn, "scene_id"), field<std::string>(jn, "frame_id")});
      }
      s.labels.push_back(std::move(l));
    }
    s.keyframes = field<std::vector<std::string>>(js, "keyframes");
    s.unreachable = field<std::vector<std::string>>(js, "unreachable");
    m.scenes.push_back(std::move(s));
  }
  m.validate();
  return m;
}

std::vector<std::string> DatasetManifest::validation_issues() const {
  std::vector<std::string> issues;
  if (!kSplits.contains(split)) issues.push_back("split must be train, val or test");
  try {
    config.thresholds.validate();
  } catch (const Error& e) {
    issues.push_back(e.what());
  }
  if (!(config.voxel_size > 0.0)) issues.push_back("voxel_size must be positive");
  if (scenes.empty()) issues.push_back("manifest has no scenes");

  std::map<std::string, std::set<std::string>> ids;
  for (const auto& s : scenes) {
    if (s.scene_id.empty()) issues.push_back("scene with empty scene_id");
    if (ids.contains(s.scene_id)) issues.push_back("duplicate scene " + s.scene_id);
    auto& set = ids[s.scene_id];
    for (const auto& f : s.frames) {
      if (!set.insert(f.frame_id).second) issues.push_back("duplicate frame " + join_ref(s.scene_id, f.frame_id));
    }
  }

  for (const auto& s : scenes) {
    const auto& own = ids[s.scene_id];
    if (s.frames.empty()) issues.push_back("scene " + s.scene_id + " has no frames");
    if (s.labels.size() != s.frames.size()) {
      issues.push_back("scene " + s.scene_id + " has " + std::to_string(s.labels.size()) +
                       " label entries for " + std::to_string(s.frames.size()) + " frames");
    }
    for (const auto& f : s.frames) {
      if (f.frame_id.empty()) issues.push_back("frame with empty frame_id in scene " + s.scene_id);
      if (f.scene_id != s.scene_id) issues.push_back("frame " + f.frame_id + " carries scene " + f.scene_id);
      if (!f.pose.is_valid()) issues.push_back("frame " + join_ref(s.scene_id, f.frame_id) + " has an invalid pose");
    }
    const std::set<std::string> keyframes(s.keyframes.begin(), s.keyframes.end());
    const std::set<std::string> unreachable(s.unreachable.begin(), s.unreachable.end());
    for (const auto& k : s.keyframes) {
      if (!own.contains(k)) issues.push_back("keyframe " + join_ref(s.scene_id, k) + " does not resolve");
    }
    for (const auto& u : s.unreachable) {
      if (!own.contains(u)) issues.push_back("unreachable frame " + join_ref(s.scene_id, u) + " does not resolve");
      if (keyframes.contains(u)) issues.push_back("keyframe " + join_ref(s.scene_id, u) + " marked unreachable");
    }
    const std::size_t n = std::min(s.frames.size(), s.labels.size());
    for (std::size_t i = 0; i < n; ++i) {
      const auto& fid = s.frames[i].frame_id;
      const auto& l = s.labels[i];
      const std::string where = join_ref(s.scene_id, fid);
      std::set<std::string> pos;
      bool sees_keyframe = false;
      for (const auto& p : l.positives) {
        if (p == fid) issues.push_back(where + " lists itself as positive");
        if (!own.contains(p)) issues.push_back(where + " positive " + p + " does not resolve");
        pos.insert(p);
        sees_keyframe = sees_keyframe || keyframes.contains(p);
      }
      for (const auto& ng : l.negatives) {
        const auto it = ids.find(ng.scene_id);
        if (it == ids.end() || !it->second.contains(ng.frame_id)) {
          issues.push_back(where + " negative " + ng.key() + " does not resolve");
        }
        if (ng.scene_id == s.scene_id && ng.frame_id == fid) issues.push_back(where + " lists itself as negative");
        if (ng.scene_id == s.scene_id && pos.contains(ng.frame_id)) {
          issues.push_back(where + " lists " + ng.frame_id + " as positive and negative");
        }
      }
      if (!keyframes.empty() && !keyframes.contains(fid) && !sees_keyframe && !unreachable.contains(fid)) {
        issues.push_back(where + " has no keyframe positive and is not marked unreachable");
      }
    }
  }
  return issues;
}

void DatasetManifest::validate() const {
  auto issues = validation_issues();
  if (!issues.empty()) throw ValidationError(std::move(issues));
}

const FrameRecord* DatasetManifest::find(const FrameRef& ref) const {
  for (const auto& s : scenes) {
    if (s.scene_id != ref.scene_id) continue;
    for (const auto& f : s.frames) {
      if (f.frame_id == ref.frame_id) return &f;
    }
  }
  return nullptr;
}

void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  manifest.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << manifest_to_json(manifest).dump(2) << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

namespace {

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError({path.string() + ": " + e.what()});
  }
}

}  // namespace

DatasetManifest read_manifest(const std::filesystem::path& path) {
  return manifest_from_json(read_json_file(path));
}

DatasetManifest generate_dataset(const std::vector<SceneSequence>& sequences,
                                 const CloudLoader& loader, const GenerationConfig& config,
                                 const std::string& split, std::size_t threads) {
  config.thresholds.validate();
  if (!(config.voxel_size > 0.0)) throw InvalidArgument("voxel_size must be positive");
  if (sequences.empty()) throw InvalidArgument("generate_dataset: no scenes");

  std::vector<std::vector<VoxelizedFrame>> database(sequences.size());
  for (std::size_t s = 0; s < sequences.size(); ++s) {
    const auto& seq = sequences[s];
    if (seq.frames.empty()) throw InvalidArgument("scene " + seq.scene_id + " has no frames");
    std::vector<VoxelizedFrame> all(seq.frames.size());
    parallel_for(all.size(), threads, [&](std::size_t i) {
      all[i] = voxelize_frame(seq.frames[i], loader, config.voxel_size);
    });
    std::vector<VoxelGrid> grids;
    grids.reserve(all.size());
    for (const auto& v : all) grids.push_back(v.grid);
    for (std::size_t i : select_database_indices(grids, config.thresholds.t_c)) {
      database[s].push_back(std::move(all[i]));
    }
  }

  const auto labels = label_pairs(database, config.thresholds,
                                  {config.negative_cap, config.seed, threads});

  DatasetManifest m;
  m.split = split;
  m.config = config;
  for (std::size_t s = 0; s < sequences.size(); ++s) {
    SceneEntry entry;
    entry.scene_id = sequences[s].scene_id;
    for (const auto& v : database[s]) entry.frames.push_back(v.record);
    entry.labels = labels[s];
    entry.keyframes = extract_keyframes(entry.frames, entry.labels);
    const std::set<std::string> keys(entry.keyframes.begin(), entry.keyframes.end());
    for (std::size_t i = 0; i < entry.frames.size(); ++i) {
      const auto& fid = entry.frames[i].frame_id;
      if (keys.contains(fid)) continue;
      const auto& pos = entry.labels[i].positives;
      if (std::none_of(pos.begin(), pos.end(), [&](const std::string& p) { return keys.contains(p); })) {
        entry.unreachable.push_back(fid);
      }
    }
    m.scenes.push_back(std::move(entry));
  }
  m.validate();
  return m;
}

std::vector<SceneSequence> read_scene_directory(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw IoError("scene directory not found: " + dir.string());
  std::vector<fs::path> scene_dirs;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_directory() && fs::exists(e.path() / "trajectory.json")) scene_dirs.push_back(e.path());
  }
  std::sort(scene_dirs.begin(), scene_dirs.end());
  if (scene_dirs.empty()) throw IoError("no scene with trajectory.json under " + dir.string());

  std::vector<SceneSequence> out;
  for (const auto& sd : scene_dirs) {
    const json j = read_json_file(sd / "trajectory.json");
    SceneSequence seq;
    seq.scene_id = j.contains("scene_id") ? field<std::string>(j, "scene_id") : sd.filename().string();
    for (const auto& jf : field<json>(j, "frames")) {
      FrameRecord f;
      f.frame_id = field<std::string>(jf, "frame_id");
      f.scene_id = seq.scene_id;
      const fs::path cloud = field<std::string>(jf, "cloud");
      f.cloud_path = cloud.is_relative() ? sd / cloud : cloud;
      f.pose = pose_from_json(field<json>(jf, "pose"));
      if (jf.contains("semantic")) {
        const fs::path sem = field<std::string>(jf, "semantic");
        f.semantic_path = sem.is_relative() ? sd / sem : sem;
      }
      seq.frames.push_back(std::move(f));
    }
    out.push_back(std::move(seq));
  }
  return out;
}

void write_trajectory(const SceneSequence& sequence, const std::filesystem::path& scene_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(scene_dir);
  ordered_json frames = ordered_json::array();
  for (const auto& f : sequence.frames) {
    const fs::path cloud = f.cloud_path.is_relative() ? f.cloud_path
                                                       : f.cloud_path.lexically_proximate(scene_dir);
    ordered_json jf{{"frame_id", f.frame_id}, {"cloud", cloud.generic_string()}, {"pose", pose_to_json(f.pose)}};
    if (f.semantic_path) jf["semantic"] = f.semantic_path->generic_string();
    frames.push_back(std::move(jf));
  }
  const ordered_json j{{"scene_id", sequence.scene_id}, {"frames", frames}};
  std::ofstream out(scene_dir / "trajectory.json", std::ios::binary);
  if (!out) throw IoError("cannot write " + (scene_dir / "trajectory.json").string());
  out << j.dump(2) << '\n';
}

}  // namespace cscpr
