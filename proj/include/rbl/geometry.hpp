#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <sstream>
#include <utility>

#include <Eigen/Dense>

#include "rbl/error.hpp"

namespace rbl {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
/// K×3 point set, one node per row.
using Points = Eigen::Matrix<double, Eigen::Dynamic, 3>;
using Mask = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

inline constexpr double kRadToDeg = 180.0 / std::numbers::pi;
inline constexpr double kDegToRad = std::numbers::pi / 180.0;

inline Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return m;
}

inline Vec3 vee(const Mat3& m) { return {m(2, 1), m(0, 2), m(1, 0)}; }

/// Squared pairwise distances between the rows of `points`.
inline Eigen::MatrixXd squared_distance_matrix(const Points& points) {
  const Eigen::Index n = points.rows();
  Eigen::MatrixXd d(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    d(i, i) = 0.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      d(i, j) = d(j, i) = (points.row(i) - points.row(j)).squaredNorm();
    }
  }
  return d;
}

inline Eigen::MatrixXd distance_matrix(const Points& points) {
  return squared_distance_matrix(points).cwiseSqrt();
}

/// Numerical rank of the centered point set (0..3).
inline int affine_rank(const Points& points, double relative_tol = 1e-9) {
  if (points.rows() < 2) return 0;
  const Points centered = points.rowwise() - points.colwise().mean();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(centered);
  const Eigen::Vector3d s = svd.singularValues().head<3>();
  const double scale = std::max(s(0), 1e-300);
  int rank = 0;
  for (int i = 0; i < 3; ++i) {
    if (s(i) > relative_tol * scale && s(i) > 1e-12) ++rank;
  }
  return rank;
}

/// Body-frame node coordinates of a rigid body, stored exactly as given.
class Conformation {
 public:
  explicit Conformation(Points nodes) : nodes_(std::move(nodes)) {
    if (nodes_.rows() < 3) {
      throw Error(ErrorCode::invalid_conformation, "a conformation needs at least 3 nodes");
    }
    if (!nodes_.allFinite()) {
      throw Error(ErrorCode::invalid_conformation, "node coordinates must be finite");
    }
    const Eigen::MatrixXd d2 = squared_distance_matrix(nodes_);
    for (Eigen::Index i = 0; i < nodes_.rows(); ++i) {
      for (Eigen::Index j = i + 1; j < nodes_.rows(); ++j) {
        if (!(d2(i, j) > 0.0)) {
          std::ostringstream os;
          os << "nodes " << i << " and " << j << " coincide";
          throw Error(ErrorCode::invalid_conformation, os.str());
        }
      }
    }
    const int rank = affine_rank(nodes_);
    if (rank < 2) {
      throw Error(ErrorCode::invalid_conformation, "nodes are collinear");
    }
    planar_ = rank == 2;
  }

  const Points& nodes() const noexcept { return nodes_; }
  Eigen::Index size() const noexcept { return nodes_.rows(); }
  /// True for a flat (rank-2) body; estimators then face a reflection ambiguity.
  bool planar() const noexcept { return planar_; }
  Vec3 centroid() const { return nodes_.colwise().mean().transpose(); }
  Points centered() const { return nodes_.rowwise() - nodes_.colwise().mean(); }
  Eigen::MatrixXd squared_distances() const { return squared_distance_matrix(nodes_); }

 private:
  Points nodes_;
  bool planar_ = false;
};

struct Pose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static Pose identity() { return {}; }
};

struct Twist {
  Vec3 angular = Vec3::Zero();  // rad/s
  Vec3 linear = Vec3::Zero();   // m/s
};

struct RigidBodyState {
  Conformation conformation;
  Pose pose;
  std::optional<Twist> twist;
};

inline bool is_rotation(const Mat3& r, double tol = 1e-9) {
  if (!r.allFinite()) return false;
  const Mat3 gram = r.transpose() * r;
  if ((gram - Mat3::Identity()).cwiseAbs().maxCoeff() > tol) return false;
  return std::abs(r.determinant() - 1.0) <= tol;
}

inline void validate_pose(const Pose& pose) {
  if (!is_rotation(pose.rotation)) {
    throw Error(ErrorCode::invalid_pose, "rotation is not orthonormal with det +1");
  }
  if (!pose.translation.allFinite()) {
    throw Error(ErrorCode::invalid_pose, "translation must be finite");
  }
}

/// Applies `inner` first, then `outer`.
inline Pose compose(const Pose& outer, const Pose& inner) {
  return {outer.rotation * inner.rotation, outer.rotation * inner.translation + outer.translation};
}

inline Pose inverse(const Pose& pose) {
  const Mat3 rt = pose.rotation.transpose();
  return {rt, -rt * pose.translation};
}

/// World coordinates R·c_k + t of every node.
inline Points apply_pose(const Points& body, const Pose& pose) {
  validate_pose(pose);
  Points world = body * pose.rotation.transpose();
  world.rowwise() += pose.translation.transpose();
  return world;
}

inline Points apply_pose(const Conformation& conf, const Pose& pose) {
  return apply_pose(conf.nodes(), pose);
}

/// Rodrigues formula. The zero vector maps to the identity.
inline Mat3 so3_exp(const Vec3& axis_angle) {
  const double theta2 = axis_angle.squaredNorm();
  const Mat3 k = skew(axis_angle);
  double a;
  double b;
  if (theta2 < 1e-16) {
    a = 1.0 - theta2 / 6.0;
    b = 0.5 - theta2 / 24.0;
  } else {
    const double theta = std::sqrt(theta2);
    a = std::sin(theta) / theta;
    b = (1.0 - std::cos(theta)) / theta2;
  }
  return Mat3::Identity() + a * k + b * k * k;
}

/// Inverse of so3_exp on rotations with angle in [0, π].
inline Vec3 so3_log(const Mat3& r) {
  const Vec3 w = 0.5 * vee(r - r.transpose());  // sin(θ)·axis
  const double s = w.norm();
  const double c = std::clamp(0.5 * (r.trace() - 1.0), -1.0, 1.0);
  const double theta = std::atan2(s, c);
  if (s < 1e-10 && c > 0.0) {
    return w * (1.0 + theta * theta / 6.0);
  }
  if (theta < std::numbers::pi - 1e-6) {
    return w * (theta / s);
  }
  // Near π: recover the axis from the symmetric part, aaᵀ = (sym(R) − cI)/(1 − c).
  const Mat3 aat = (0.5 * (r + r.transpose()) - c * Mat3::Identity()) / (1.0 - c);
  Eigen::Index best = 0;
  aat.diagonal().maxCoeff(&best);
  Vec3 axis = aat.col(best) / std::sqrt(std::max(aat(best, best), 1e-300));
  axis.normalize();
  if (axis.dot(w) < 0.0) axis = -axis;
  return axis * theta;
}

/// Nearest rotation in Frobenius norm, with the sign correction applied to the
/// direction of the smallest singular value.
inline Mat3 so3_project(const Mat3& m) {
  if (!m.allFinite()) {
    throw Error(ErrorCode::degenerate_projection, "matrix has non-finite entries");
  }
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 s = svd.singularValues();
  if (!(s(2) > 1e-12 * std::max(s(0), 1e-300))) {
    throw Error(ErrorCode::degenerate_projection, "matrix is rank deficient");
  }
  const Mat3& u = svd.matrixU();
  const Mat3& v = svd.matrixV();
  Vec3 d(1.0, 1.0, (u * v.transpose()).determinant() < 0.0 ? -1.0 : 1.0);
  return u * d.asDiagonal() * v.transpose();
}

// Geodesic angle arccos((tr(A Bᵀ) - 1) / 2), evaluated via half-angle chord
// lengths so that small angles keep full precision.
inline double rotation_error_deg(const Mat3& a, const Mat3& b) {
  const double half_sin = (a - b).norm() / (2.0 * std::numbers::sqrt2);
  const double half_cos = std::sqrt(std::max(0.0, 0.25 * ((a * b.transpose()).trace() + 1.0)));
  return 2.0 * std::atan2(half_sin, half_cos) * kRadToDeg;
}

inline double translation_error(const Pose& estimate, const Pose& truth) {
  return (estimate.translation - truth.translation).norm();
}

/// Node velocities [ω]ₓ·R·c_i + ṫ in the world frame.
inline Points node_velocities(const RigidBodyState& state) {
  if (!state.twist) {
    throw Error(ErrorCode::missing_twist, "node velocities need a twist");
  }
  const Mat3 w = skew(state.twist->angular) * state.pose.rotation;
  Points v = state.conformation.nodes() * w.transpose();
  v.rowwise() += state.twist->linear.transpose();
  return v;
}

/// Constant-twist propagation: R ← exp(ω·dt)·R, t ← t + ṫ·dt.
inline RigidBodyState propagate_state(const RigidBodyState& state, double dt) {
  if (!state.twist) {
    throw Error(ErrorCode::missing_twist, "propagation needs a twist");
  }
  if (!(dt >= 0.0) || !std::isfinite(dt)) {
    throw Error(ErrorCode::invalid_interval, "dt must be finite and non-negative");
  }
  RigidBodyState next = state;
  next.pose.rotation = so3_exp(state.twist->angular * dt) * state.pose.rotation;
  next.pose.translation = state.pose.translation + state.twist->linear * dt;
  return next;
}

}  // namespace rbl
