#pragma once

#include <algorithm>
#include <cmath>

#include "rbl/error.hpp"
#include "rbl/geometry.hpp"

namespace rbl {

/// A body summarized by one unit heading vector plus a reference point.
struct SemanticHeading {
  Vec3 body_vector = Vec3::UnitX();
  Vec3 world_vector = Vec3::UnitX();
  Vec3 anchor_point = Vec3::Zero();
};

inline void validate_heading(const SemanticHeading& h) {
  if (!h.body_vector.allFinite() || std::abs(h.body_vector.norm() - 1.0) > 1e-12) {
    throw Error(ErrorCode::invalid_heading, "body vector must have unit norm");
  }
}

inline SemanticHeading semantic_transform(const SemanticHeading& heading, const Pose& pose) {
  validate_heading(heading);
  validate_pose(pose);
  SemanticHeading out = heading;
  out.world_vector = pose.rotation * heading.body_vector;
  out.anchor_point = pose.translation;
  return out;
}

struct SemanticError {
  double angle_deg;
  double offset_m;
};

inline SemanticError semantic_error(const SemanticHeading& a, const SemanticHeading& b) {
  const double c = a.world_vector.dot(b.world_vector) / (a.world_vector.norm() * b.world_vector.norm());
  const double s = a.world_vector.cross(b.world_vector).norm() / (a.world_vector.norm() * b.world_vector.norm());
  return {std::atan2(s, std::clamp(c, -1.0, 1.0)) * kRadToDeg, (a.anchor_point - b.anchor_point).norm()};
}

}  // namespace rbl
