#pragma once

#include <span>

#include "cscpr/geometry.hpp"

namespace cscpr {

/// Least-squares rigid transform with R src + t ≈ dst and det(R) = +1.
/// Throws DegenerateGeometry for fewer than three points or collinear or
/// coincident input.
Pose kabsch_align(std::span<const Vec3> src, std::span<const Vec3> dst);

double alignment_rms(std::span<const Vec3> src, std::span<const Vec3> dst, const Pose& pose);

}  // namespace cscpr
