#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "cscpr/point_cloud.hpp"

namespace cscpr {

using VoxelKey = std::array<std::int64_t, 3>;

/// Occupied voxel set; `occupied` is sorted and unique, so two grids built from
/// permutations of the same points compare equal.
struct VoxelGrid {
  double voxel_size = 0.0;
  std::vector<VoxelKey> occupied;

  std::size_t size() const noexcept { return occupied.size(); }
  friend bool operator==(const VoxelGrid&, const VoxelGrid&) = default;
};

inline constexpr double kDefaultOverlapVoxel = 0.1;

VoxelKey voxel_of(const Vec3& p, double voxel_size);

VoxelGrid voxelize(std::span<const Vec3> positions, double voxel_size);
VoxelGrid voxelize(const PointCloud& cloud, double voxel_size);

std::size_t intersection_size(const VoxelGrid& a, const VoxelGrid& b);

/// |A ∩ B| / |A ∪ B|.
double voxel_iou(const VoxelGrid& a, const VoxelGrid& b);
/// |Q ∩ D| / |Q|.
double voxel_coverage(const VoxelGrid& query, const VoxelGrid& db);

double symmetric_frame_overlap(const PointCloud& a, const PointCloud& b, const Pose& pose_a,
                               const Pose& pose_b, double voxel_size = kDefaultOverlapVoxel);

double asymmetric_overlap(const PointCloud& query, const PointCloud& db, const Pose& pose_q,
                          const Pose& pose_d, double voxel_size = kDefaultOverlapVoxel);

}  // namespace cscpr
