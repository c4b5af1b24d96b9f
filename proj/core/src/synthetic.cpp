#include "cscpr/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>

#include "cscpr/error.hpp"
#include "cscpr/rng.hpp"
#include "cscpr/voxel.hpp"

namespace cscpr {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

Vec3 random_color(Rng& rng) {
  return {rng.uniform(0.15, 0.85), rng.uniform(0.15, 0.85), rng.uniform(0.15, 0.85)};
}

// Rectangle origin + u*a + v*b, u,v in [0,1], with a fixed normal.
struct Patch {
  Vec3 origin;
  Vec3 a;
  Vec3 b;
  Vec3 normal;
  Vec3 color;
  double phase;
};

void sample_patch(const Patch& patch, double density, Rng& rng, std::vector<Point>& out) {
  const double area = patch.a.cross(patch.b).norm();
  const auto count = static_cast<std::size_t>(std::ceil(area * density));
  const double la = patch.a.norm();
  const double lb = patch.b.norm();
  for (std::size_t i = 0; i < count; ++i) {
    const double u = rng.uniform();
    const double v = rng.uniform();
    Point p;
    p.position = patch.origin + u * patch.a + v * patch.b;
    // Stripes plus a checker so that nearby points differ in color.
    const double s = std::sin(kTwoPi * u * la / 0.6 + patch.phase);
    const double c = std::cos(kTwoPi * v * lb / 0.45 + 0.5 * patch.phase);
    const double checker =
        (static_cast<long>(std::floor(u * la / 0.3)) + static_cast<long>(std::floor(v * lb / 0.3))) % 2 == 0
            ? 0.08
            : -0.08;
    const Vec3 shade{0.12 * s, 0.12 * c, 0.1 * s * c};
    p.color = (patch.color + shade + Vec3::Constant(checker)).cwiseMax(0.0).cwiseMin(1.0);
    p.normal = patch.normal;
    out.push_back(p);
  }
}

std::string frame_name(const char* prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s_%04zu", prefix, i);
  return buf;
}

std::vector<std::size_t> thin(std::size_t n, std::size_t cap, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (n <= cap) return idx;
  for (std::size_t i = 0; i < cap; ++i) {
    std::swap(idx[i], idx[i + static_cast<std::size_t>(rng.below(n - i))]);
  }
  idx.resize(cap);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace

PointCloud make_room(const RoomConfig& config, Rng& rng) {
  const double w = config.extent.x();
  const double d = config.extent.y();
  const double h = config.extent.z();
  if (!(w > 1.0 && d > 1.0 && h > 0.5) || !(config.density > 0.0)) {
    throw InvalidArgument("make_room: room too small or density not positive");
  }
  const Vec3 lo{-w / 2, -d / 2, 0.0};
  std::vector<Patch> patches = {
      {lo, {w, 0, 0}, {0, d, 0}, {0, 0, 1}, {}, 0},                  // floor
      {lo + Vec3(0, 0, h), {w, 0, 0}, {0, d, 0}, {0, 0, -1}, {}, 0},  // ceiling
      {lo, {0, d, 0}, {0, 0, h}, {1, 0, 0}, {}, 0},                  // x = -w/2
      {lo + Vec3(w, 0, 0), {0, d, 0}, {0, 0, h}, {-1, 0, 0}, {}, 0},
      {lo, {w, 0, 0}, {0, 0, h}, {0, 1, 0}, {}, 0},                  // y = -d/2
      {lo + Vec3(0, d, 0), {w, 0, 0}, {0, 0, h}, {0, -1, 0}, {}, 0},
  };
  for (auto& p : patches) {
    p.color = random_color(rng);
    p.phase = rng.uniform(0.0, kTwoPi);
  }

  const double r_max = std::min(w, d) / 2 - 0.45;
  for (std::size_t b = 0; b < config.boxes; ++b) {
    const double angle = rng.uniform(0.0, kTwoPi);
    const double r = rng.uniform(std::min(1.0, r_max), std::max(1.0, r_max));
    const double sx = rng.uniform(0.15, 0.3);
    const double sy = rng.uniform(0.15, 0.3);
    const double sz = rng.uniform(0.3, 1.0);
    const Vec3 c{r * std::cos(angle), r * std::sin(angle), 0.0};
    const Vec3 o = c - Vec3(sx, sy, 0);
    const Vec3 color = random_color(rng);
    const double phase = rng.uniform(0.0, kTwoPi);
    const std::array<Patch, 5> faces = {{
        {o + Vec3(0, 0, sz), {2 * sx, 0, 0}, {0, 2 * sy, 0}, {0, 0, 1}, color, phase},
        {o, {0, 2 * sy, 0}, {0, 0, sz}, {-1, 0, 0}, color, phase},
        {o + Vec3(2 * sx, 0, 0), {0, 2 * sy, 0}, {0, 0, sz}, {1, 0, 0}, color, phase},
        {o, {2 * sx, 0, 0}, {0, 0, sz}, {0, -1, 0}, color, phase},
        {o + Vec3(0, 2 * sy, 0), {2 * sx, 0, 0}, {0, 0, sz}, {0, 1, 0}, color, phase},
    }};
    patches.insert(patches.end(), faces.begin(), faces.end());
  }

  std::vector<Point> points;
  for (const auto& p : patches) sample_patch(p, config.density, rng, points);
  return PointCloud(std::move(points));
}

Pose camera_pose(const Vec3& position, double yaw) {
  const Vec3 forward{std::cos(yaw), std::sin(yaw), 0.0};
  const Vec3 right{std::sin(yaw), -std::cos(yaw), 0.0};
  const Vec3 down{0.0, 0.0, -1.0};
  Pose pose;
  pose.rotation.col(0) = right;
  pose.rotation.col(1) = down;
  pose.rotation.col(2) = forward;
  pose.translation = position;
  return pose;
}

PointCloud frustum_crop(const PointCloud& world, const Pose& camera,
                        const SyntheticSceneConfig& config, std::size_t max_points, Rng& rng) {
  const Pose to_camera = camera.inverse();
  const double tx = std::tan(config.half_fov_x);
  const double ty = std::tan(config.half_fov_y);
  std::vector<Point> inside;
  for (const auto& p : world.points()) {
    const Vec3 c = to_camera.apply(p.position);
    if (c.z() < config.near || c.z() > config.far) continue;
    if (std::abs(c.x()) > c.z() * tx || std::abs(c.y()) > c.z() * ty) continue;
    inside.push_back({p.color, c, to_camera.rotate(p.normal)});
  }
  if (inside.empty()) throw InvalidArgument("frustum_crop: no point inside the frustum");
  std::vector<Point> out;
  for (std::size_t i : thin(inside.size(), max_points, rng)) out.push_back(inside[i]);
  return PointCloud(std::move(out));
}

SyntheticScene make_scene(const std::string& scene_id, const SyntheticSceneConfig& config,
                          std::uint64_t seed) {
  if (config.frames == 0 || config.points_per_frame == 0) {
    throw InvalidArgument("make_scene: frames and points_per_frame must be positive");
  }
  Rng rng(seed, 0x5CE);
  const PointCloud room = make_room(config.room, rng);
  SyntheticScene scene;
  scene.scene_id = scene_id;
  for (std::size_t i = 0; i < config.frames; ++i) {
    const double yaw = kTwoPi * config.turns * static_cast<double>(i) / static_cast<double>(config.frames);
    const Vec3 position{config.radius * std::cos(yaw), config.radius * std::sin(yaw), config.height};
    FrameRecord rec;
    rec.frame_id = frame_name("frame", i);
    rec.scene_id = scene_id;
    rec.cloud_path = std::filesystem::path(scene_id) / (rec.frame_id + ".pcb");
    rec.pose = camera_pose(position, yaw);
    Rng crop_rng(seed, 0x1000 + i);
    scene.clouds.push_back(frustum_crop(room, rec.pose, config, config.points_per_frame, crop_rng));
    scene.frames.push_back(std::move(rec));
  }
  return scene;
}

void write_scene_pack(const std::vector<SyntheticScene>& scenes, const std::filesystem::path& dir) {
  for (const auto& scene : scenes) {
    const auto scene_dir = dir / scene.scene_id;
    std::filesystem::create_directories(scene_dir);
    SceneSequence seq{scene.scene_id, {}};
    for (std::size_t i = 0; i < scene.frames.size(); ++i) {
      FrameRecord rec = scene.frames[i];
      rec.cloud_path = rec.cloud_path.filename();
      write_pcb(scene.clouds[i], scene_dir / rec.cloud_path);
      seq.frames.push_back(std::move(rec));
    }
    write_trajectory(seq, scene_dir);
  }
}

std::vector<SceneSequence> to_sequences(const std::vector<SyntheticScene>& scenes) {
  std::vector<SceneSequence> out;
  for (const auto& s : scenes) out.push_back({s.scene_id, s.frames});
  return out;
}

void MemoryClouds::add(const FrameRecord& frame, PointCloud cloud) {
  clouds.insert_or_assign(FrameRef{frame.scene_id, frame.frame_id}.key(), std::move(cloud));
}

CloudLoader MemoryClouds::loader() const {
  return [this](const FrameRecord& frame) {
    const auto key = FrameRef{frame.scene_id, frame.frame_id}.key();
    const auto it = clouds.find(key);
    if (it == clouds.end()) throw IoError("frame " + key + ": no cloud in memory");
    return it->second;
  };
}

MemoryClouds memory_clouds(const std::vector<SyntheticScene>& scenes) {
  MemoryClouds m;
  for (const auto& s : scenes) {
    for (std::size_t i = 0; i < s.frames.size(); ++i) m.add(s.frames[i], s.clouds[i]);
  }
  return m;
}

RigidQueryPack make_rigid_query_pack(const RigidQueryConfig& config, std::uint64_t seed) {
  if (config.keyframes < 2) throw InvalidArgument("make_rigid_query_pack: need two keyframes");
  if (!(config.noise_fraction >= 0.0 && config.noise_fraction <= 1.0)) {
    throw InvalidArgument("make_rigid_query_pack: noise_fraction must lie in [0, 1]");
  }
  Rng rng(seed, 0xA11);
  SyntheticSceneConfig scene_config;
  const PointCloud room = make_room(scene_config.room, rng);
  const std::string scene_id = "rigid";

  RigidQueryPack pack;
  SceneEntry entry;
  entry.scene_id = scene_id;
  std::vector<FrameRecord> keys;
  std::vector<FrameRecord> queries;
  for (std::size_t i = 0; i < config.keyframes; ++i) {
    const double yaw = kTwoPi * static_cast<double>(i) / static_cast<double>(config.keyframes);
    FrameRecord key;
    key.frame_id = frame_name("key", i);
    key.scene_id = scene_id;
    key.cloud_path = key.frame_id + ".pcb";
    key.pose = camera_pose({0.0, 0.0, scene_config.height}, yaw);
    Rng crop_rng(seed, 0x2000 + i);
    const PointCloud key_cloud = frustum_crop(room, key.pose, scene_config, config.points_per_frame, crop_rng);

    Vec3 axis{rng.normal(), rng.normal(), rng.normal()};
    axis.normalize();
    Pose t;
    t.rotation = axis_angle(axis, rng.uniform(-config.max_rotation, config.max_rotation));
    for (int c = 0; c < 3; ++c) t.translation(c) = rng.uniform(-config.max_translation, config.max_translation);

    const PointCloud moved_cloud = transform(key_cloud, t);
    std::vector<Point> moved(moved_cloud.points().begin(), moved_cloud.points().end());
    const auto noisy = static_cast<std::size_t>(std::floor(config.noise_fraction * static_cast<double>(moved.size())));
    for (std::size_t k : thin(moved.size(), noisy, rng)) {
      moved[k].position += config.noise_sigma * Vec3(rng.normal(), rng.normal(), rng.normal());
    }

    FrameRecord query;
    query.frame_id = frame_name("query", i);
    query.scene_id = scene_id;
    query.cloud_path = query.frame_id + ".pcb";
    query.pose = key.pose.compose(t.inverse());

    pack.clouds.add(key, key_cloud);
    pack.clouds.add(query, PointCloud(std::move(moved)));
    keys.push_back(std::move(key));
    queries.push_back(std::move(query));
  }

  for (std::size_t i = 0; i < keys.size(); ++i) {
    FrameLabels labels;
    labels.positives = {queries[i].frame_id};
    for (std::size_t j = 0; j < keys.size(); ++j) {
      if (j != i) labels.negatives.push_back({scene_id, keys[j].frame_id});
    }
    entry.frames.push_back(keys[i]);
    entry.labels.push_back(std::move(labels));
    entry.keyframes.push_back(keys[i].frame_id);
  }
  for (std::size_t i = 0; i < queries.size(); ++i) {
    FrameLabels labels;
    labels.positives = {keys[i].frame_id};
    for (std::size_t j = 0; j < keys.size(); ++j) {
      if (j != i) labels.negatives.push_back({scene_id, keys[j].frame_id});
    }
    entry.frames.push_back(queries[i]);
    entry.labels.push_back(std::move(labels));
  }
  pack.manifest.config.seed = seed;
  pack.manifest.scenes.push_back(std::move(entry));
  pack.manifest.validate();
  return pack;
}

ToyDataset make_toy_dataset(std::uint64_t seed, const ExtractorConfig& config) {
  SyntheticSceneConfig sc;
  sc.frames = 12;
  sc.turns = 1.0;
  sc.points_per_frame = 400;
  const SyntheticScene a = make_scene("toy_a", sc, Rng::mix(seed, 1));
  const SyntheticScene b = make_scene("toy_b", sc, Rng::mix(seed, 2));
  const Extractor extractor{config, ExtractorWeights::init(config, seed)};

  std::vector<VoxelGrid> grids;
  for (std::size_t i = 0; i < a.frames.size(); ++i) {
    grids.push_back(voxelize(transform(a.clouds[i], a.frames[i].pose), kDefaultOverlapVoxel));
  }

  ToyDataset data;
  auto add = [&](const PointCloud& cloud) {
    auto out = extractor(cloud);
    data.features.push_back(std::move(out.point_features));
    data.descriptors.push_back(std::move(out.descriptor));
    return data.features.size() - 1;
  };
  for (std::size_t q = 0; q < 10; q += 2) {
    std::size_t best = q == 0 ? 1 : 0;
    for (std::size_t d = 0; d < grids.size(); ++d) {
      if (d != q && voxel_coverage(grids[q], grids[d]) > voxel_coverage(grids[q], grids[best])) best = d;
    }
    const std::size_t qi = add(a.clouds[q]);
    const std::size_t pi = add(a.clouds[best]);
    const std::size_t ni = add(b.clouds[q + 1]);
    data.pairs.push_back({qi, pi, 1});
    data.pairs.push_back({qi, ni, 0});
  }
  data.validate();
  return data;
}

}  // namespace cscpr
