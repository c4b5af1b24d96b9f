#include "cscpr/point_cloud.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "cscpr/error.hpp"

namespace cscpr {
namespace {

constexpr char kPcbMagic[8] = {'P', 'C', 'B', '1', '\0', '\0', '\0', '\0'};

static_assert(std::endian::native == std::endian::little,
              "PCB1 I/O assumes a little-endian host");

void check_point(const Point& p, std::size_t index) {
  const auto row = p.row();
  for (double v : row) {
    if (!std::isfinite(v)) {
      throw InvalidArgument("point " + std::to_string(index) + " has a non-finite value");
    }
  }
  for (int c = 0; c < 3; ++c) {
    if (p.color[c] < 0.0 || p.color[c] > 1.0) {
      throw InvalidArgument("point " + std::to_string(index) + " color outside [0,1]");
    }
  }
  const double len = p.normal.norm();
  if (len != 0.0 && std::abs(len - 1.0) > 1e-4) {
    throw InvalidArgument("point " + std::to_string(index) + " normal is neither unit nor zero");
  }
}

}  // namespace

PointCloud::PointCloud(std::vector<Point> points) : points_(std::move(points)) {
  if (points_.empty()) throw InvalidArgument("point cloud must contain at least one point");
  for (std::size_t i = 0; i < points_.size(); ++i) check_point(points_[i], i);
}

std::vector<Vec3> PointCloud::positions() const {
  std::vector<Vec3> out;
  out.reserve(points_.size());
  for (const auto& p : points_) out.push_back(p.position);
  return out;
}

PointCloud transform(const PointCloud& cloud, const Pose& pose) {
  std::vector<Point> out(cloud.points().begin(), cloud.points().end());
  for (auto& p : out) {
    p.position = pose.apply(p.position);
    if (p.normal.squaredNorm() > 0.0) p.normal = pose.rotate(p.normal);
  }
  return PointCloud(std::move(out));
}

PointCloud canonical_order(const PointCloud& cloud) {
  std::vector<Point> out(cloud.points().begin(), cloud.points().end());
  std::stable_sort(out.begin(), out.end(), [](const Point& a, const Point& b) {
    const auto ra = a.row();
    const auto rb = b.row();
    // Position channels first.
    constexpr int order[9] = {3, 4, 5, 0, 1, 2, 6, 7, 8};
    for (int c : order) {
      if (ra[c] != rb[c]) return ra[c] < rb[c];
    }
    return false;
  });
  return PointCloud(std::move(out));
}

double bounding_diameter(std::span<const Vec3> positions) {
  if (positions.empty()) return 0.0;
  Vec3 lo = positions.front();
  Vec3 hi = positions.front();
  for (const auto& p : positions) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  return (hi - lo).norm();
}

void write_pcb(const PointCloud& cloud, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(kPcbMagic, sizeof(kPcbMagic));
  const std::uint64_t n = cloud.size();
  out.write(reinterpret_cast<const char*>(&n), sizeof(n));
  std::vector<float> buffer(9 * cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto row = cloud[i].row();
    for (int c = 0; c < 9; ++c) buffer[9 * i + c] = static_cast<float>(row[c]);
  }
  out.write(reinterpret_cast<const char*>(buffer.data()),
            static_cast<std::streamsize>(buffer.size() * sizeof(float)));
  if (!out) throw IoError("failed writing " + path.string());
}

PointCloud read_pcb(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open point cloud " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kPcbMagic, sizeof(magic)) != 0) {
    throw IoError("bad PCB1 magic in " + path.string());
  }
  std::uint64_t n = 0;
  in.read(reinterpret_cast<char*>(&n), sizeof(n));
  if (!in) throw IoError("truncated PCB1 header in " + path.string());

  in.seekg(0, std::ios::end);
  const auto end = static_cast<std::uint64_t>(in.tellg());
  const std::uint64_t header = sizeof(kPcbMagic) + sizeof(n);
  if (n == 0 || (end - header) / (9 * sizeof(float)) < n) {
    throw IoError("truncated PCB1 payload in " + path.string());
  }
  in.seekg(static_cast<std::streamoff>(header), std::ios::beg);

  std::vector<float> buffer(9 * n);
  in.read(reinterpret_cast<char*>(buffer.data()),
          static_cast<std::streamsize>(buffer.size() * sizeof(float)));
  if (!in) throw IoError("truncated PCB1 payload in " + path.string());

  std::vector<Point> pts(n);
  for (std::size_t i = 0; i < n; ++i) {
    const float* r = &buffer[9 * i];
    pts[i].color = Vec3(r[0], r[1], r[2]);
    pts[i].position = Vec3(r[3], r[4], r[5]);
    pts[i].normal = Vec3(r[6], r[7], r[8]);
  }
  try {
    return PointCloud(std::move(pts));
  } catch (const InvalidArgument& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

}  // namespace cscpr
