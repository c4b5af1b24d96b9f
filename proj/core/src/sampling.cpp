#include "cscpr/sampling.hpp"

#include <algorithm>
#include <numeric>

#include "cscpr/error.hpp"

namespace cscpr {
namespace {

// Lexicographic position order with the input index as the final key.
std::vector<std::size_t> canonical_indices(std::span<const Vec3> positions) {
  std::vector<std::size_t> order(positions.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (lex_less(positions[a], positions[b])) return true;
    if (lex_less(positions[b], positions[a])) return false;
    return a < b;
  });
  return order;
}

}  // namespace

std::vector<std::size_t> farthest_point_sample(std::span<const Vec3> positions, std::size_t m) {
  const std::size_t n = positions.size();
  if (m == 0) throw InvalidArgument("farthest_point_sample: m must be at least 1");
  if (m > n) {
    throw InvalidArgument("farthest_point_sample: m=" + std::to_string(m) +
                          " exceeds point count " + std::to_string(n));
  }

  const auto order = canonical_indices(positions);
  std::vector<Vec3> pts(n);
  Vec3 centroid = Vec3::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    pts[i] = positions[order[i]];
    centroid += pts[i];
  }
  centroid /= static_cast<double>(n);

  // Scanning in canonical order with a strict comparison resolves ties to the
  // lexicographically smallest point.
  std::size_t seed = 0;
  double best = -1.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = (pts[i] - centroid).squaredNorm();
    if (d > best) {
      best = d;
      seed = i;
    }
  }

  std::vector<std::size_t> picked;
  picked.reserve(m);
  picked.push_back(seed);
  std::vector<double> min_dist(n);
  for (std::size_t i = 0; i < n; ++i) min_dist[i] = (pts[i] - pts[seed]).squaredNorm();
  // Picked points sit below every candidate, so duplicates are never re-picked.
  min_dist[seed] = -1.0;

  while (picked.size() < m) {
    std::size_t next = 0;
    double far = -2.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (min_dist[i] > far) {
        far = min_dist[i];
        next = i;
      }
    }
    picked.push_back(next);
    min_dist[next] = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      min_dist[i] = std::min(min_dist[i], (pts[i] - pts[next]).squaredNorm());
    }
  }

  std::vector<std::size_t> out(m);
  for (std::size_t i = 0; i < m; ++i) out[i] = order[picked[i]];
  return out;
}

std::vector<std::size_t> farthest_point_sample(const PointCloud& cloud, std::size_t m) {
  const auto pos = cloud.positions();
  return farthest_point_sample(pos, m);
}

NeighborTable knn(std::span<const Vec3> query, std::span<const Vec3> base, std::size_t k) {
  if (k > base.size()) {
    throw InvalidArgument("knn: k=" + std::to_string(k) + " exceeds base size " +
                          std::to_string(base.size()));
  }
  NeighborTable table;
  table.rows = query.size();
  table.k = k;
  table.indices.resize(query.size() * k);
  if (k == 0) return table;

  std::vector<std::size_t> cand(base.size());
  std::vector<double> dist(base.size());
  for (std::size_t q = 0; q < query.size(); ++q) {
    for (std::size_t i = 0; i < base.size(); ++i) dist[i] = (base[i] - query[q]).squaredNorm();
    std::iota(cand.begin(), cand.end(), std::size_t{0});
    auto closer = [&](std::size_t a, std::size_t b) {
      if (dist[a] != dist[b]) return dist[a] < dist[b];
      if (lex_less(base[a], base[b])) return true;
      if (lex_less(base[b], base[a])) return false;
      return a < b;
    };
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k), cand.end(),
                      closer);
    std::copy_n(cand.begin(), k, table.indices.begin() + static_cast<std::ptrdiff_t>(q * k));
  }
  return table;
}

}  // namespace cscpr
