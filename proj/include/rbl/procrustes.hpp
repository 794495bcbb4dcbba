#pragma once

#include <cmath>
#include <optional>
#include <string>

#include "rbl/error.hpp"
#include "rbl/geometry.hpp"

namespace rbl {

enum class EstimateStatus {
  converged,
  max_iterations,
  no_convergence,  // damping cap reached without a cost decrease
  diverged,
};

inline const char* to_string(EstimateStatus s) {
  switch (s) {
    case EstimateStatus::converged: return "converged";
    case EstimateStatus::max_iterations: return "max-iterations";
    case EstimateStatus::no_convergence: return "no-convergence";
    case EstimateStatus::diverged: return "diverged";
  }
  return "unknown";
}

struct PoseEstimate {
  Pose pose;
  std::optional<Points> node_positions;  // intermediate per-node estimate, if the method has one
  int iterations = 0;
  double residual_rms = 0.0;
  std::string method;
  double projection_distance = 0.0;  // Frobenius norm removed when projecting onto SO(3)
  EstimateStatus status = EstimateStatus::converged;
};

/// Re-projects the rotation onto SO(3), recording how far it moved.
inline void finalize_rotation(PoseEstimate& estimate) {
  const Mat3 projected = so3_project(estimate.pose.rotation);
  estimate.projection_distance = (projected - estimate.pose.rotation).norm();
  estimate.pose.rotation = projected;
}

/// Weighted orthogonal alignment: argmin over proper R and t of
/// Σ w_k‖R·source_k + t − target_k‖².
inline Pose procrustes(const Points& source, const Points& target,
                       const std::optional<Eigen::VectorXd>& weights = std::nullopt) {
  const Eigen::Index k = source.rows();
  if (target.rows() != k) throw Error(ErrorCode::invalid_argument, "source and target sizes differ");
  Eigen::VectorXd w = weights.value_or(Eigen::VectorXd::Ones(k));
  if (w.size() != k || (w.array() < 0.0).any() || !w.allFinite()) {
    throw Error(ErrorCode::invalid_argument, "weights must be finite, non-negative and one per node");
  }
  Points active(k, 3);
  Eigen::Index used = 0;
  for (Eigen::Index i = 0; i < k; ++i) {
    if (w(i) > 0.0) active.row(used++) = source.row(i);
  }
  active.conservativeResize(used, 3);
  if (used < 3 || affine_rank(active) < 2) {
    throw Error(ErrorCode::ambiguous_alignment, "source points are collinear or too few");
  }

  const double wsum = w.sum();
  const Vec3 src_mean = (source.transpose() * w) / wsum;
  const Vec3 dst_mean = (target.transpose() * w) / wsum;
  const Points src = source.rowwise() - src_mean.transpose();
  const Points dst = target.rowwise() - dst_mean.transpose();
  const Mat3 cross = src.transpose() * w.asDiagonal() * dst;  // Σ w s tᵀ

  Eigen::JacobiSVD<Mat3> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Mat3& u = svd.matrixU();
  const Mat3& v = svd.matrixV();
  // Singular values are sorted descending, so the flip lands on the smallest one.
  const double sign = (v * u.transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  const Mat3 rotation = v * Vec3(1.0, 1.0, sign).asDiagonal() * u.transpose();
  return {rotation, dst_mean - rotation * src_mean};
}

/// Root-mean-square distance between transformed source and target.
inline double alignment_rms(const Points& source, const Points& target, const Pose& pose) {
  Points moved = source * pose.rotation.transpose();
  moved.rowwise() += pose.translation.transpose();
  return std::sqrt((moved - target).rowwise().squaredNorm().mean());
}

}  // namespace rbl
