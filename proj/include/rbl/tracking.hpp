#pragma once

#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "rbl/error.hpp"
#include "rbl/bounds.hpp"
#include "rbl/estimators.hpp"
#include "rbl/geometry.hpp"
#include "rbl/measurement.hpp"

namespace rbl {

struct TwistEstimate {
  Twist twist;
  double residual_rms = 0.0;  // m/s
  Eigen::Index used = 0;
};

/// Weighted linear least squares for (ω, ṫ) from range rates at a known pose:
/// u_jkᵀ(−[R·c_k]ₓ·ω + ṫ) = ṙ_jk. Weights default to 1.
inline TwistEstimate estimate_twist(const AnchorSet& anchors, const Conformation& conf, const Pose& pose,
                                    const Eigen::MatrixXd& range_rates, const Mask& mask,
                                    const std::optional<Eigen::MatrixXd>& weights = std::nullopt) {
  validate_pose(pose);
  if (range_rates.rows() != anchors.size() || range_rates.cols() != conf.size() || mask.rows() != anchors.size() ||
      mask.cols() != conf.size()) {
    throw Error(ErrorCode::invalid_argument, "range rates and mask must be A×K");
  }
  if (weights && (weights->rows() != anchors.size() || weights->cols() != conf.size())) {
    throw Error(ErrorCode::invalid_argument, "weights must be A×K");
  }
  const Eigen::Index m = mask.count();
  if (m < 6) throw Error(ErrorCode::underdetermined, "need at least 6 observed range rates");

  Eigen::MatrixXd a(m, 6);
  Eigen::VectorXd b(m);
  Eigen::VectorXd sw(m);
  const Points world = apply_pose(conf, pose);
  Eigen::Index row = 0;
  for (Eigen::Index j = 0; j < anchors.size(); ++j) {
    for (Eigen::Index k = 0; k < conf.size(); ++k) {
      if (!mask(j, k)) continue;
      const Vec3 d = (world.row(k) - anchors.positions().row(j)).transpose();
      const double rho = d.norm();
      if (!(rho > 0.0)) throw Error(ErrorCode::undefined_bearing, "node coincides with anchor");
      const Eigen::RowVector3d u = d.transpose() / rho;
      const Vec3 lever = pose.rotation * conf.nodes().row(k).transpose();
      a.block<1, 3>(row, 0) = -u * skew(lever);
      a.block<1, 3>(row, 3) = u;
      b(row) = range_rates(j, k);
      const double w = weights ? (*weights)(j, k) : 1.0;
      if (!(w >= 0.0)) throw Error(ErrorCode::invalid_argument, "weights must be non-negative");
      sw(row) = std::sqrt(w);
      ++row;
    }
  }

  const Eigen::MatrixXd aw = sw.asDiagonal() * a;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(aw, Eigen::ComputeThinU | Eigen::ComputeFullV);
  const Eigen::VectorXd s = svd.singularValues();
  int rank = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > 1e-9 * s(0)) ++rank;
  }
  if (rank < 6) {
    const Eigen::MatrixXd null = svd.matrixV().rightCols(6 - rank);
    std::ostringstream os;
    os << "range-rate regressor has rank " << rank << "; unobservable (ω, ṫ) directions:";
    for (Eigen::Index c = 0; c < null.cols(); ++c) os << " [" << null.col(c).transpose() << "]";
    throw RankDeficientError(ErrorCode::unobservable_twist, os.str(), null);
  }
  const Vector6d x = svd.solve(sw.asDiagonal() * b);
  TwistEstimate out;
  out.twist.angular = x.head<3>();
  out.twist.linear = x.tail<3>();
  out.used = m;
  out.residual_rms = std::sqrt((a * x - b).squaredNorm() / static_cast<double>(m));
  return out;
}

enum class TrackEstimator { nls, mds, gabp };

struct TrackConfig {
  TrackEstimator estimator = TrackEstimator::nls;
  bool warm_start = true;  // NLS starts from the previous estimate propagated by its twist
  NlsOptions nls;
  GabpOptions gabp;
  double range_rate_sigma = 1.0;  // twist weights 1/σ²
};

struct TrackInput {
  double timestamp = 0.0;
  MeasurementSet measurements;  // ranges and range rates
};

struct TrackFrame {
  double timestamp = 0.0;
  std::optional<PoseEstimate> pose_estimate;
  std::optional<Twist> twist_estimate;
  double twist_residual_rms = 0.0;
  std::string error;  // empty on success
};

/// Frame-to-frame tracking: pose per frame, then twist at that pose. No
/// smoothing across frames; the previous frame only seeds the NLS start.
inline std::vector<TrackFrame> track_sequence(const AnchorSet& anchors, const Conformation& conf,
                                              const std::vector<TrackInput>& frames, const TrackConfig& config = {}) {
  for (std::size_t i = 1; i < frames.size(); ++i) {
    if (!(frames[i].timestamp > frames[i - 1].timestamp)) {
      throw Error(ErrorCode::invalid_interval, "timestamps must be strictly increasing");
    }
  }
  const double wr = config.range_rate_sigma > 0.0 ? 1.0 / (config.range_rate_sigma * config.range_rate_sigma) : 1.0;
  std::vector<TrackFrame> out;
  out.reserve(frames.size());
  std::optional<RigidBodyState> previous;
  double previous_time = 0.0;

  for (const auto& input : frames) {
    TrackFrame frame;
    frame.timestamp = input.timestamp;
    try {
      const MeasurementSet& m = input.measurements;
      switch (config.estimator) {
        case TrackEstimator::nls: {
          NlsOptions opt = config.nls;
          if (config.warm_start && previous) {
            opt.init = propagate_state(*previous, input.timestamp - previous_time).pose;
          }
          frame.pose_estimate = estimate_pose_nls(m, anchors, conf, opt);
          break;
        }
        case TrackEstimator::mds:
          frame.pose_estimate = mds_from_ranges(m, anchors, conf).estimate;
          break;
        case TrackEstimator::gabp:
          frame.pose_estimate = estimate_pose_gabp(m, anchors, conf, config.gabp).estimate;
          break;
      }
      if (!m.has_range_rates()) throw Error(ErrorCode::invalid_argument, "frame has no range rates");
      const Eigen::MatrixXd w = Eigen::MatrixXd::Constant(anchors.size(), conf.size(), wr);
      const TwistEstimate te = estimate_twist(anchors, conf, frame.pose_estimate->pose, m.range_rates, m.mask, w);
      frame.twist_estimate = te.twist;
      frame.twist_residual_rms = te.residual_rms;
      previous = RigidBodyState{conf, frame.pose_estimate->pose, te.twist};
      previous_time = input.timestamp;
    } catch (const Error& e) {
      frame.error = e.what();
      previous.reset();
    }
    out.push_back(std::move(frame));
  }
  return out;
}

}  // namespace rbl
