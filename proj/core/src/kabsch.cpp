#include "cscpr/kabsch.hpp"

#include <Eigen/SVD>
#include <cmath>

#include "cscpr/error.hpp"

namespace cscpr {
namespace {

// Rank check on the centered scatter: coincident or collinear sets have at
// most one non-negligible singular value.
bool is_degenerate(std::span<const Vec3> pts, const Vec3& centroid) {
  Mat3 scatter = Mat3::Zero();
  for (const auto& p : pts) {
    const Vec3 d = p - centroid;
    scatter += d * d.transpose();
  }
  const Eigen::JacobiSVD<Mat3> svd(scatter);
  const Vec3 s = svd.singularValues();
  if (!(s[0] > 1e-24)) return true;
  return s[1] <= 1e-10 * s[0];
}

}  // namespace

Pose kabsch_align(std::span<const Vec3> src, std::span<const Vec3> dst) {
  if (src.size() != dst.size()) throw InvalidArgument("kabsch_align: size mismatch");
  if (src.size() < 3) throw DegenerateGeometry("kabsch_align needs at least three points");

  Vec3 cs = Vec3::Zero();
  Vec3 cd = Vec3::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) {
    cs += src[i];
    cd += dst[i];
  }
  cs /= static_cast<double>(src.size());
  cd /= static_cast<double>(dst.size());
  if (is_degenerate(src, cs) || is_degenerate(dst, cd)) {
    throw DegenerateGeometry("kabsch_align: collinear or coincident correspondences");
  }

  Mat3 h = Mat3::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) h += (src[i] - cs) * (dst[i] - cd).transpose();

  const Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Mat3 u = svd.matrixU();
  const Mat3 v = svd.matrixV();
  Mat3 fix = Mat3::Identity();
  fix(2, 2) = (v * u.transpose()).determinant() < 0.0 ? -1.0 : 1.0;

  Pose pose;
  pose.rotation = v * fix * u.transpose();
  pose.translation = cd - pose.rotation * cs;
  if (!pose.rotation.allFinite() || !pose.translation.allFinite()) {
    throw NumericError("kabsch_align produced a non-finite transform");
  }
  return pose;
}

double alignment_rms(std::span<const Vec3> src, std::span<const Vec3> dst, const Pose& pose) {
  if (src.size() != dst.size() || src.empty()) {
    throw InvalidArgument("alignment_rms: size mismatch or empty input");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < src.size(); ++i) acc += (pose.apply(src[i]) - dst[i]).squaredNorm();
  return std::sqrt(acc / static_cast<double>(src.size()));
}

}  // namespace cscpr
