#include "cscpr/geometry.hpp"

#include <cmath>

#include "cscpr/error.hpp"

namespace cscpr {

bool Pose::is_valid(double tol) const {
  if (!rotation.allFinite() || !translation.allFinite()) return false;
  const Mat3 gram = rotation.transpose() * rotation;
  if ((gram - Mat3::Identity()).cwiseAbs().maxCoeff() > tol) return false;
  return std::abs(rotation.determinant() - 1.0) <= tol;
}

void Pose::validate() const {
  if (!is_valid()) throw InvalidArgument("pose rotation is not a proper orthonormal matrix");
}

Pose Pose::inverse() const {
  Pose inv;
  inv.rotation = rotation.transpose();
  inv.translation = -(inv.rotation * translation);
  return inv;
}

Pose Pose::compose(const Pose& rhs) const {
  Pose out;
  out.rotation = rotation * rhs.rotation;
  out.translation = rotation * rhs.translation + translation;
  return out;
}

Mat3 axis_angle(const Vec3& axis, double angle) {
  return Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
}

}  // namespace cscpr
