#pragma once

#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "rbl/error.hpp"
#include "rbl/geometry.hpp"
#include "rbl/measurement.hpp"

namespace rbl {

using Vector6d = Eigen::Matrix<double, 6, 1>;
using RowVector6d = Eigen::Matrix<double, 1, 6>;
using Matrix6d = Eigen::Matrix<double, 6, 6>;

/// Gradient of ‖R·exp([θ]ₓ)·c + t − a‖ at θ = 0 with respect to (θ, t).
inline RowVector6d range_jacobian(const Vec3& anchor, const Vec3& body_node, const Pose& pose) {
  const Vec3 d = pose.rotation * body_node + pose.translation - anchor;
  const double rho = d.norm();
  if (!(rho > 0.0)) throw Error(ErrorCode::undefined_bearing, "node coincides with anchor");
  const Eigen::RowVector3d u = d.transpose() / rho;
  RowVector6d j;
  j.head<3>() = -u * pose.rotation * skew(body_node);
  j.tail<3>() = u;
  return j;
}

struct CrlbReport {
  Matrix6d fim = Matrix6d::Zero();
  std::optional<Matrix6d> crlb;
  double translation_bound = std::numeric_limits<double>::quiet_NaN();  // m², trace of translation block
  double rotation_bound = std::numeric_limits<double>::quiet_NaN();     // rad², trace of rotation block
  double sigma = 0.0;
  double condition_number = std::numeric_limits<double>::infinity();
  bool singular = true;
  Eigen::MatrixXd null_space;  // 6×d basis of the unobservable directions
  Eigen::Index measurements = 0;
};

inline double rad2_to_deg2(double rad2) { return rad2 * kRadToDeg * kRadToDeg; }

/// Fisher information for range measurements, parameters ordered
/// (axis-angle right perturbation, translation).
inline CrlbReport fim_ranges(const AnchorSet& anchors, const Conformation& conf, const Pose& pose, const Mask& mask,
                             double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw Error(ErrorCode::invalid_argument, "sigma must be positive");
  if (mask.rows() != anchors.size() || mask.cols() != conf.size()) {
    throw Error(ErrorCode::invalid_argument, "mask must be A×K");
  }
  if (!mask.any()) throw Error(ErrorCode::invalid_argument, "mask has no observed entries");
  validate_pose(pose);

  CrlbReport out;
  out.sigma = sigma;
  Matrix6d info = Matrix6d::Zero();
  for (Eigen::Index j = 0; j < anchors.size(); ++j) {
    for (Eigen::Index k = 0; k < conf.size(); ++k) {
      if (!mask(j, k)) continue;
      const RowVector6d g = range_jacobian(anchors.position(j), conf.nodes().row(k).transpose(), pose);
      info += g.transpose() * g;
      ++out.measurements;
    }
  }
  out.fim = info / (sigma * sigma);

  Eigen::SelfAdjointEigenSolver<Matrix6d> eig(out.fim);
  const Vector6d ev = eig.eigenvalues();  // ascending
  const double top = ev(5);
  int nullity = 0;
  for (int i = 0; i < 6; ++i) {
    if (!(ev(i) > 1e-10 * top)) ++nullity;
  }
  out.condition_number = ev(0) > 0.0 ? top / ev(0) : std::numeric_limits<double>::infinity();
  out.singular = nullity > 0;
  if (out.singular) {
    out.null_space = eig.eigenvectors().leftCols(nullity);
    return out;
  }
  out.crlb = out.fim.inverse();
  out.translation_bound = out.crlb->bottomRightCorner<3, 3>().trace();
  out.rotation_bound = out.crlb->topLeftCorner<3, 3>().trace();
  return out;
}

struct CrlbScenario {
  AnchorSet anchors;
  Conformation conformation;
  Pose pose;
  Mask mask;
};

struct CrlbRow {
  double sigma;
  double translation_bound;  // m²
  double rotation_bound;     // rad²
  double condition_number;
};

inline std::vector<CrlbRow> crlb_sweep(const CrlbScenario& scenario, const std::vector<double>& sigma_grid) {
  std::vector<CrlbRow> rows;
  rows.reserve(sigma_grid.size());
  for (const double sigma : sigma_grid) {
    const CrlbReport r = fim_ranges(scenario.anchors, scenario.conformation, scenario.pose, scenario.mask, sigma);
    if (r.singular) {
      throw RankDeficientError(ErrorCode::singular_fim, "Fisher information is singular", r.null_space);
    }
    rows.push_back({sigma, r.translation_bound, r.rotation_bound, r.condition_number});
  }
  return rows;
}

inline std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

inline void write_crlb_csv(std::ostream& os, const std::vector<CrlbRow>& rows) {
  os << "sigma,crlb_translation_m2,crlb_rotation_rad2,condition_number\n";
  for (const auto& r : rows) {
    os << format_number(r.sigma) << ',' << format_number(r.translation_bound) << ','
       << format_number(r.rotation_bound) << ',' << format_number(r.condition_number) << '\n';
  }
}

/// Frame potential Σᵢⱼ⟨uᵢ, uⱼ⟩² of a set of unit vectors (rows).
inline double frame_potential(const Points& unit_vectors) {
  const Eigen::MatrixXd g = unit_vectors * unit_vectors.transpose();
  return g.squaredNorm();
}

struct PoseBound {
  double translation_bound;
  double rotation_bound;
  bool singular;
};

struct PlacementScore {
  double score = std::numeric_limits<double>::infinity();
  std::vector<PoseBound> per_pose;
  std::vector<std::size_t> flagged;  // prior poses with singular information
  double frame_potential = 0.0;      // of anchor → mean body centroid directions
};

/// Mean over prior poses of translation_bound + λ·rotation_bound with every
/// anchor–node link observed.
inline PlacementScore placement_score(const AnchorSet& anchors, const Conformation& conf,
                                      const std::vector<Pose>& pose_prior, double sigma, double lambda = 1.0) {
  if (pose_prior.empty()) throw Error(ErrorCode::invalid_argument, "pose prior set is empty");
  const Mask full = Mask::Constant(anchors.size(), conf.size(), true);
  PlacementScore out;
  double sum = 0.0;
  std::size_t used = 0;
  Vec3 centroid = Vec3::Zero();
  for (std::size_t i = 0; i < pose_prior.size(); ++i) {
    const CrlbReport r = fim_ranges(anchors, conf, pose_prior[i], full, sigma);
    out.per_pose.push_back({r.translation_bound, r.rotation_bound, r.singular});
    centroid += pose_prior[i].rotation * conf.centroid() + pose_prior[i].translation;
    if (r.singular) {
      out.flagged.push_back(i);
      continue;
    }
    sum += r.translation_bound + lambda * r.rotation_bound;
    ++used;
  }
  if (used > 0) out.score = sum / static_cast<double>(used);
  centroid /= static_cast<double>(pose_prior.size());
  Points dirs(anchors.size(), 3);
  for (Eigen::Index j = 0; j < anchors.size(); ++j) {
    const Vec3 d = centroid - anchors.position(j);
    dirs.row(j) = d.norm() > 0.0 ? Eigen::RowVector3d(d.transpose() / d.norm()) : Eigen::RowVector3d::Zero();
  }
  out.frame_potential = frame_potential(dirs);
  return out;
}

}  // namespace rbl
