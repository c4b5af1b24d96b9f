#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "cscpr/geometry.hpp"

namespace cscpr {

/// One colorized point: color in [0,1], position in meters, unit normal
/// (or the all-zero "no normal" sentinel).
struct Point {
  Vec3 color = Vec3::Zero();
  Vec3 position = Vec3::Zero();
  Vec3 normal = Vec3::Zero();

  /// The nine channels in storage order (r,g,b,x,y,z,nx,ny,nz).
  std::array<double, 9> row() const {
    return {color.x(),    color.y(),    color.z(),  position.x(), position.y(),
            position.z(), normal.x(),   normal.y(), normal.z()};
  }

  friend bool operator==(const Point&, const Point&) = default;
};

/// Immutable N x 9 colorized point cloud. Construction validates the invariants:
/// N >= 1, finite values, colors in [0,1], normals unit length (1e-4) or zero.
class PointCloud {
 public:
  PointCloud() = default;
  explicit PointCloud(std::vector<Point> points);

  std::size_t size() const noexcept { return points_.size(); }
  bool empty() const noexcept { return points_.empty(); }
  const Point& operator[](std::size_t i) const { return points_[i]; }
  std::span<const Point> points() const noexcept { return points_; }

  std::vector<Vec3> positions() const;

  friend bool operator==(const PointCloud&, const PointCloud&) = default;

 private:
  std::vector<Point> points_;
};

/// Positions rotated and translated; normals rotated only; colors unchanged.
PointCloud transform(const PointCloud& cloud, const Pose& pose);

/// Row order sorted by (x,y,z) then the remaining channels, so that any two
/// permutations of the same multiset of rows map to the same cloud.
PointCloud canonical_order(const PointCloud& cloud);

/// Axis-aligned bounding-box diagonal.
double bounding_diameter(std::span<const Vec3> positions);

// PCB1 binary format: magic "PCB1\0\0\0\0", u64 count, then count records of
// nine little-endian float32 (r,g,b,x,y,z,nx,ny,nz).
void write_pcb(const PointCloud& cloud, const std::filesystem::path& path);
PointCloud read_pcb(const std::filesystem::path& path);

}  // namespace cscpr
