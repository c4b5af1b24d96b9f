#include "cscpr/voxel.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>

#include "cscpr/error.hpp"

namespace cscpr {

VoxelKey voxel_of(const Vec3& p, double voxel_size) {
  return {static_cast<std::int64_t>(std::floor(p.x() / voxel_size)),
          static_cast<std::int64_t>(std::floor(p.y() / voxel_size)),
          static_cast<std::int64_t>(std::floor(p.z() / voxel_size))};
}

VoxelGrid voxelize(std::span<const Vec3> positions, double voxel_size) {
  if (!(voxel_size > 0.0) || !std::isfinite(voxel_size)) {
    throw InvalidArgument("voxel_size must be positive");
  }
  VoxelGrid grid;
  grid.voxel_size = voxel_size;
  grid.occupied.reserve(positions.size());
  for (const auto& p : positions) grid.occupied.push_back(voxel_of(p, voxel_size));
  std::sort(grid.occupied.begin(), grid.occupied.end());
  grid.occupied.erase(std::unique(grid.occupied.begin(), grid.occupied.end()),
                      grid.occupied.end());
  return grid;
}

VoxelGrid voxelize(const PointCloud& cloud, double voxel_size) {
  const auto pos = cloud.positions();
  return voxelize(pos, voxel_size);
}

std::size_t intersection_size(const VoxelGrid& a, const VoxelGrid& b) {
  std::size_t count = 0;
  auto ia = a.occupied.begin();
  auto ib = b.occupied.begin();
  while (ia != a.occupied.end() && ib != b.occupied.end()) {
    if (*ia < *ib) {
      ++ia;
    } else if (*ib < *ia) {
      ++ib;
    } else {
      ++count;
      ++ia;
      ++ib;
    }
  }
  return count;
}

double voxel_iou(const VoxelGrid& a, const VoxelGrid& b) {
  const std::size_t inter = intersection_size(a, b);
  const std::size_t uni = a.size() + b.size() - inter;
  if (uni == 0) throw InvalidArgument("overlap of two empty voxel grids is undefined");
  return static_cast<double>(inter) / static_cast<double>(uni);
}

double voxel_coverage(const VoxelGrid& query, const VoxelGrid& db) {
  if (query.size() == 0) throw InvalidArgument("query voxel grid is empty");
  return static_cast<double>(intersection_size(query, db)) /
         static_cast<double>(query.size());
}

double symmetric_frame_overlap(const PointCloud& a, const PointCloud& b, const Pose& pose_a,
                               const Pose& pose_b, double voxel_size) {
  if (a.empty() || b.empty()) throw InvalidArgument("overlap requires nonempty clouds");
  return voxel_iou(voxelize(transform(a, pose_a), voxel_size),
                   voxelize(transform(b, pose_b), voxel_size));
}

double asymmetric_overlap(const PointCloud& query, const PointCloud& db, const Pose& pose_q,
                          const Pose& pose_d, double voxel_size) {
  if (query.empty()) throw InvalidArgument("overlap requires a nonempty query");
  if (db.empty()) return 0.0;
  return voxel_coverage(voxelize(transform(query, pose_q), voxel_size),
                        voxelize(transform(db, pose_d), voxel_size));
}

}  // namespace cscpr
