#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <span>
#include <vector>

namespace cscpr {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Rigid transform mapping local coordinates into a parent frame: y = R x + t.
struct Pose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static Pose identity() { return {}; }

  /// Throws InvalidArgument unless rotation is orthonormal with det +1 (tol 1e-6).
  void validate() const;
  bool is_valid(double tol = 1e-6) const;

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
  Vec3 rotate(const Vec3& v) const { return rotation * v; }

  Pose inverse() const;
  Pose compose(const Pose& rhs) const;  // this ∘ rhs

  friend bool operator==(const Pose& a, const Pose& b) {
    return a.rotation == b.rotation && a.translation == b.translation;
  }
};

/// Rotation about a unit axis by angle radians (Rodrigues).
Mat3 axis_angle(const Vec3& axis, double angle);

/// Strict lexicographic order on (x, y, z).
inline bool lex_less(const Vec3& a, const Vec3& b) {
  if (a.x() != b.x()) return a.x() < b.x();
  if (a.y() != b.y()) return a.y() < b.y();
  return a.z() < b.z();
}

}  // namespace cscpr
