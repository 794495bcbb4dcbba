#pragma once

#include <algorithm>
#include <optional>
#include <vector>

#include "rbl/geometry.hpp"

namespace rbl {

/// Closed halfspace {x : normal·x ≤ offset}.
struct Halfspace {
  Vec3 normal;
  double offset;
};

// Brute-force facet enumeration: every plane through three points that has all
// points on one side is a supporting plane. O(K⁴), fine for body-sized K.
// Flat point sets additionally get the in-plane edge planes.
inline std::vector<Halfspace> convex_hull_halfspaces(const Points& points, double tol = 1e-9) {
  std::vector<Halfspace> out;
  const Eigen::Index n = points.rows();
  const double scale = std::max(1.0, (points.rowwise() - points.colwise().mean()).cwiseAbs().maxCoeff());
  const double eps = tol * scale;

  auto add_if_supporting = [&](const Vec3& normal, const Vec3& through) {
    const Eigen::VectorXd side = points * normal - Eigen::VectorXd::Constant(n, normal.dot(through));
    if (side.maxCoeff() <= eps) out.push_back({normal, normal.dot(through)});
    if (side.minCoeff() >= -eps) out.push_back({-normal, -normal.dot(through)});
  };

  std::optional<Vec3> plane_normal;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      for (Eigen::Index k = j + 1; k < n; ++k) {
        const Vec3 pi = points.row(i).transpose();
        Vec3 normal = (points.row(j).transpose() - pi).cross(points.row(k).transpose() - pi);
        if (normal.norm() < eps * scale) continue;
        normal.normalize();
        if (!plane_normal) plane_normal = normal;
        add_if_supporting(normal, pi);
      }
    }
  }
  if (affine_rank(points) == 2 && plane_normal) {
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = i + 1; j < n; ++j) {
        const Vec3 pi = points.row(i).transpose();
        Vec3 normal = (points.row(j).transpose() - pi).cross(*plane_normal);
        if (normal.norm() < eps) continue;
        add_if_supporting(normal.normalized(), pi);
      }
    }
  }
  return out;
}

/// Liang–Barsky style clipping of segment [a, b] against the intersection of halfspaces.
inline bool segment_intersects(const Vec3& a, const Vec3& b, const std::vector<Halfspace>& halfspaces,
                               double tol = 1e-12) {
  double t0 = 0.0;
  double t1 = 1.0;
  const Vec3 d = b - a;
  for (const auto& h : halfspaces) {
    const double num = h.offset + tol - h.normal.dot(a);
    const double den = h.normal.dot(d);
    if (std::abs(den) < 1e-15) {
      if (num < 0.0) return false;
      continue;
    }
    const double t = num / den;
    if (den > 0.0) {
      t1 = std::min(t1, t);
    } else {
      t0 = std::max(t0, t);
    }
    if (t0 > t1) return false;
  }
  return true;
}

}  // namespace rbl
