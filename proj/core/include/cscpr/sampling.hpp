#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "cscpr/geometry.hpp"
#include "cscpr/point_cloud.hpp"

namespace cscpr {

/// Deterministic farthest point sampling. The first pick is the point farthest
/// from the centroid; each later pick maximizes the squared distance to the
/// selected set. Ties go to the lexicographically smallest (x,y,z), then the
/// smallest input index. Returns indices into `positions`.
std::vector<std::size_t> farthest_point_sample(std::span<const Vec3> positions, std::size_t m);
std::vector<std::size_t> farthest_point_sample(const PointCloud& cloud, std::size_t m);

/// Row-major |query| x k matrix of base indices.
struct NeighborTable {
  std::size_t rows = 0;
  std::size_t k = 0;
  std::vector<std::size_t> indices;

  std::span<const std::size_t> row(std::size_t r) const {
    return std::span<const std::size_t>(indices).subspan(r * k, k);
  }
};

/// Brute-force k nearest neighbors ordered by (distance, x, y, z, index).
NeighborTable knn(std::span<const Vec3> query, std::span<const Vec3> base, std::size_t k);

}  // namespace cscpr
