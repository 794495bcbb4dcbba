#pragma once

#include <cmath>
#include <vector>

#include "rbl/error.hpp"
#include "rbl/geometry.hpp"
#include "rbl/measurement.hpp"

namespace rbl {

using BoolVector = Eigen::Matrix<bool, Eigen::Dynamic, 1>;

/// Squared-range equations differenced against a reference anchor:
/// 2(a_j − a_ref)ᵀx = ‖a_j‖² − ‖a_ref‖² − r_j² + r_ref².
struct LinearizedRanges {
  Eigen::MatrixXd design;       // m×3
  Eigen::VectorXd rhs;          // m
  Eigen::VectorXd variance;     // per-row noise variance (first order)
  Eigen::Index reference = -1;  // anchor index used as reference
  std::vector<Eigen::Index> rows_anchor;
};

inline std::vector<Eigen::Index> observed_indices(const BoolVector& observed) {
  std::vector<Eigen::Index> out;
  for (Eigen::Index j = 0; j < observed.size(); ++j) {
    if (observed(j)) out.push_back(j);
  }
  return out;
}

/// The reference is the observed anchor with the shortest range. `sigma` only
/// scales the row variances (σ ≤ 0 is treated as 1).
inline LinearizedRanges linearize_ranges(const AnchorSet& anchors, const Eigen::VectorXd& ranges,
                                         const BoolVector& observed, double sigma = 1.0) {
  const auto idx = observed_indices(observed);
  if (idx.size() < 2) throw Error(ErrorCode::underdetermined, "need at least two observed anchors");
  Eigen::Index ref = idx.front();
  for (auto j : idx) {
    if (ranges(j) < ranges(ref)) ref = j;
  }
  const double s2 = sigma > 0.0 ? sigma * sigma : 1.0;
  const Vec3 a_ref = anchors.position(ref);
  const double r_ref = ranges(ref);

  LinearizedRanges sys;
  sys.reference = ref;
  const auto m = static_cast<Eigen::Index>(idx.size() - 1);
  sys.design.resize(m, 3);
  sys.rhs.resize(m);
  sys.variance.resize(m);
  Eigen::Index row = 0;
  for (auto j : idx) {
    if (j == ref) continue;
    const Vec3 a = anchors.position(j);
    sys.design.row(row) = 2.0 * (a - a_ref).transpose();
    sys.rhs(row) = a.squaredNorm() - a_ref.squaredNorm() - ranges(j) * ranges(j) + r_ref * r_ref;
    sys.variance(row) = 4.0 * s2 * (ranges(j) * ranges(j) + r_ref * r_ref) + 1e-300;
    sys.rows_anchor.push_back(j);
    ++row;
  }
  return sys;
}

struct MultilaterationResult {
  Vec3 position = Vec3::Zero();
  Mat3 covariance = Mat3::Zero();  // σ²(JᵀJ)⁺ at the refined point
  bool ambiguous = false;          // mirror solution exists (3 anchors or coplanar anchors)
  double residual_rms = 0.0;       // m, on true ranges
  Eigen::Index anchors_used = 0;
};

inline MultilaterationResult multilaterate_node(const AnchorSet& anchors, const Eigen::VectorXd& ranges,
                                                const BoolVector& observed, double sigma = 1.0) {
  if (ranges.size() != anchors.size() || observed.size() != anchors.size()) {
    throw Error(ErrorCode::invalid_argument, "ranges and mask must have one entry per anchor");
  }
  const auto idx = observed_indices(observed);
  if (idx.size() < 3) throw Error(ErrorCode::underdetermined, "fewer than 3 observed anchors");

  MultilaterationResult out;
  out.anchors_used = static_cast<Eigen::Index>(idx.size());
  const LinearizedRanges sys = linearize_ranges(anchors, ranges, observed, sigma);
  const Eigen::VectorXd sw = sys.variance.cwiseInverse().cwiseSqrt();
  const Eigen::MatrixXd a = sw.asDiagonal() * sys.design;
  const Eigen::VectorXd b = sw.asDiagonal() * sys.rhs;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeFullV);
  const Eigen::VectorXd s = svd.singularValues();
  const double smax = s.size() > 0 ? s(0) : 0.0;
  int rank = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > 1e-9 * smax) ++rank;
  }
  if (rank < 2) throw Error(ErrorCode::underdetermined, "observed anchors are collinear");
  svd.setThreshold(1e-9);
  Vec3 x = svd.solve(b);

  if (rank == 2) {
    // Anchors span a plane: solve along its normal for the two mirror points.
    out.ambiguous = true;
    const Vec3 n = svd.matrixV().col(2);
    const Vec3 a_ref = anchors.position(sys.reference);
    const double r_ref = ranges(sys.reference);
    const double half_b = n.dot(x - a_ref);
    const double c = (x - a_ref).squaredNorm() - r_ref * r_ref;
    const double disc = half_b * half_b - c;
    const double t = -half_b + std::sqrt(std::max(disc, 0.0));
    x += t * n;
  }

  // One Gauss–Newton step on the true (non-squared) range residuals.
  auto jacobian_residual = [&](const Vec3& p, Eigen::MatrixXd& j, Eigen::VectorXd& r) {
    j.resize(static_cast<Eigen::Index>(idx.size()), 3);
    r.resize(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const Vec3 d = p - anchors.position(idx[i]);
      const double rho = d.norm();
      const auto row = static_cast<Eigen::Index>(i);
      j.row(row) = rho > 0.0 ? Eigen::RowVector3d(d.transpose() / rho) : Eigen::RowVector3d::Zero();
      r(row) = rho - ranges(idx[i]);
    }
  };
  Eigen::MatrixXd j;
  Eigen::VectorXd r;
  jacobian_residual(x, j, r);
  Eigen::JacobiSVD<Eigen::MatrixXd> gn(j, Eigen::ComputeThinU | Eigen::ComputeThinV);
  gn.setThreshold(1e-9);
  if (gn.rank() == 3) {
    x -= gn.solve(r);
    jacobian_residual(x, j, r);
  }
  out.position = x;
  out.residual_rms = std::sqrt(r.squaredNorm() / static_cast<double>(r.size()));
  const Mat3 info = j.transpose() * j;
  const double s2 = sigma > 0.0 ? sigma * sigma : 1.0;
  out.covariance = s2 * info.completeOrthogonalDecomposition().pseudoInverse();
  return out;
}

}  // namespace rbl
