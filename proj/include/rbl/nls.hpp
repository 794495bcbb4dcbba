#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "rbl/completion.hpp"
#include "rbl/error.hpp"
#include "rbl/geometry.hpp"
#include "rbl/mds.hpp"
#include "rbl/measurement.hpp"
#include "rbl/procrustes.hpp"

namespace rbl {

struct NlsOptions {
  bool use_ranges = true;
  bool use_aoa = false;
  bool use_adoa = false;
  Eigen::Index adoa_reference = 0;
  // Residual weights are 1/σ per type; σ ≤ 0 means unit weight.
  double range_sigma = 1.0;
  double angle_sigma = 1.0;
  int max_iters = 100;
  double step_tol = 1e-10;
  double initial_damping = 1e-6;
  double max_damping = 1e10;
  std::optional<Pose> init;  // defaults to MDS on the (completed) EDM
  CompletionOptions completion;
};

namespace detail {

inline double weight_of(double sigma) { return sigma > 0.0 ? 1.0 / sigma : 1.0; }

struct AzimuthElevationGrad {
  Eigen::RowVector3d azimuth;
  Eigen::RowVector3d elevation;
};

inline AzimuthElevationGrad bearing_gradient(const Vec3& d) {
  const double h2 = d.x() * d.x() + d.y() * d.y();
  const double h = std::sqrt(h2);
  const double rho2 = h2 + d.z() * d.z();
  AzimuthElevationGrad g;
  if (h <= 1e-12 * std::sqrt(rho2)) {
    g.azimuth.setZero();
    g.elevation.setZero();
    return g;
  }
  g.azimuth << -d.y() / h2, d.x() / h2, 0.0;
  g.elevation << -d.z() * d.x() / (rho2 * h), -d.z() * d.y() / (rho2 * h), h / rho2;
  return g;
}

/// Stacked weighted residuals and their Jacobian with respect to the
/// right-perturbation axis-angle (3) and the translation (3).
struct NlsProblem {
  const MeasurementSet& meas;
  const AnchorSet& anchors;
  const Conformation& conf;
  const NlsOptions& opt;

  Eigen::Index rows() const {
    Eigen::Index n = 0;
    const Eigen::Index observed = meas.observed_count();
    if (opt.use_ranges) n += observed;
    if (opt.use_aoa) n += 2 * observed;
    if (opt.use_adoa) {
      for (Eigen::Index j = 0; j < meas.num_anchors(); ++j) {
        if (j == opt.adoa_reference) continue;
        for (Eigen::Index k = 0; k < meas.num_nodes(); ++k) {
          if (meas.mask(j, k) && meas.mask(opt.adoa_reference, k)) ++n;
        }
      }
    }
    return n;
  }

  // Fills `r` (weighted) and, if requested, `jac`. Returns the unweighted
  // residuals of the primary type for RMS reporting.
  std::vector<double> evaluate(const Pose& pose, Eigen::VectorXd& r, Eigen::MatrixXd* jac) const {
    const Eigen::Index n = rows();
    r.resize(n);
    if (jac) jac->resize(n, 6);
    std::vector<double> raw;
    const Points world = apply_pose(conf, pose);
    const double wr = weight_of(opt.range_sigma);
    const double wa = weight_of(opt.angle_sigma);
    Eigen::Index row = 0;

    // d(world_k)/d(rotation perturbation) = −R·[c_k]ₓ
    std::vector<Eigen::Matrix3d> dpos(static_cast<std::size_t>(conf.size()));
    for (Eigen::Index k = 0; k < conf.size(); ++k) {
      dpos[static_cast<std::size_t>(k)] = -pose.rotation * skew(conf.nodes().row(k).transpose());
    }
    auto put = [&](double residual, const Eigen::RowVector3d& grad_pos, Eigen::Index k, double w) {
      r(row) = w * residual;
      if (jac) {
        jac->block<1, 3>(row, 0) = w * grad_pos * dpos[static_cast<std::size_t>(k)];
        jac->block<1, 3>(row, 3) = w * grad_pos;
      }
      ++row;
    };

    for (Eigen::Index j = 0; j < meas.num_anchors(); ++j) {
      for (Eigen::Index k = 0; k < meas.num_nodes(); ++k) {
        if (!meas.mask(j, k)) continue;
        const Vec3 d = (world.row(k) - anchors.positions().row(j)).transpose();
        if (opt.use_ranges) {
          const double rho = d.norm();
          const double e = rho - meas.ranges(j, k);
          raw.push_back(e);
          put(e, rho > 0.0 ? Eigen::RowVector3d(d.transpose() / rho) : Eigen::RowVector3d::Zero(), k, wr);
        }
        if (opt.use_aoa) {
          const Bearing b = bearing_of(d);
          const auto g = bearing_gradient(d);
          const double eaz = wrap_angle(b.azimuth - meas.azimuth(j, k));
          const double eel = b.elevation - meas.elevation(j, k);
          if (!opt.use_ranges) {
            raw.push_back(eaz);
            raw.push_back(eel);
          }
          put(eaz, g.azimuth, k, wa);
          put(eel, g.elevation, k, wa);
        }
      }
    }
    if (opt.use_adoa) {
      const Eigen::Index ref = opt.adoa_reference;
      const double wd = wa / std::sqrt(2.0);
      for (Eigen::Index j = 0; j < meas.num_anchors(); ++j) {
        if (j == ref) continue;
        for (Eigen::Index k = 0; k < meas.num_nodes(); ++k) {
          if (!(meas.mask(j, k) && meas.mask(ref, k))) continue;
          const Vec3 dj = (world.row(k) - anchors.positions().row(j)).transpose();
          const Vec3 dr = (world.row(k) - anchors.positions().row(ref)).transpose();
          const double predicted = bearing_of(dj).azimuth - bearing_of(dr).azimuth;
          const double measured = meas.azimuth(j, k) - meas.azimuth(ref, k);
          const double e = wrap_angle(predicted - measured);
          if (!opt.use_ranges && !opt.use_aoa) raw.push_back(e);
          put(e, bearing_gradient(dj).azimuth - bearing_gradient(dr).azimuth, k, wd);
        }
      }
    }
    return raw;
  }
};

inline double rms(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s / static_cast<double>(v.size()));
}

}  // namespace detail

/// Damped Gauss–Newton (Levenberg) on (axis-angle, translation) over every
/// enabled measurement type. Angle residuals are wrapped before squaring.
inline PoseEstimate estimate_pose_nls(const MeasurementSet& meas, const AnchorSet& anchors, const Conformation& conf,
                                      const NlsOptions& opt = {}) {
  if (meas.num_anchors() != anchors.size() || meas.num_nodes() != conf.size()) {
    throw Error(ErrorCode::invalid_argument, "measurement set does not match anchors and conformation");
  }
  if (opt.use_ranges && !meas.has_ranges()) throw Error(ErrorCode::invalid_argument, "ranges were not measured");
  if ((opt.use_aoa || opt.use_adoa) && !meas.has_aoa()) {
    throw Error(ErrorCode::invalid_argument, "angles were not measured");
  }
  if (opt.use_adoa && (opt.adoa_reference < 0 || opt.adoa_reference >= anchors.size())) {
    throw Error(ErrorCode::invalid_argument, "angle-difference reference anchor out of range");
  }
  const detail::NlsProblem problem{meas, anchors, conf, opt};
  if (problem.rows() < 6) throw Error(ErrorCode::underdetermined, "fewer than 6 observed measurement components");

  Pose pose;
  if (opt.init) {
    validate_pose(*opt.init);
    pose = *opt.init;
  } else {
    if (!meas.has_ranges()) throw Error(ErrorCode::invalid_argument, "an initial pose is required without ranges");
    pose = mds_from_ranges(meas, anchors, conf, MissingEntryStrategy::complete, opt.completion).estimate.pose;
  }

  PoseEstimate out;
  out.method = "nls";
  out.status = EstimateStatus::max_iterations;
  Eigen::VectorXd r;
  Eigen::MatrixXd jac;
  problem.evaluate(pose, r, &jac);
  double cost = r.squaredNorm();
  double lambda = opt.initial_damping;

  for (int iter = 1; iter <= opt.max_iters; ++iter) {
    out.iterations = iter;
    const Eigen::Matrix<double, 6, 6> normal = jac.transpose() * jac;
    const Eigen::Matrix<double, 6, 1> grad = jac.transpose() * r;
    bool accepted = false;
    bool small_step = false;
    while (!accepted) {
      const Eigen::Matrix<double, 6, 6> damped = normal + lambda * Eigen::Matrix<double, 6, 6>::Identity();
      const Eigen::Matrix<double, 6, 1> step = -damped.ldlt().solve(grad);
      if (!step.allFinite()) {
        lambda *= 10.0;
      } else if (step.norm() < opt.step_tol) {
        small_step = true;
        break;
      } else {
        const Pose trial{pose.rotation * so3_exp(step.head<3>()), pose.translation + step.tail<3>()};
        Eigen::VectorXd r_trial;
        problem.evaluate(trial, r_trial, nullptr);
        const double trial_cost = r_trial.squaredNorm();
        if (trial_cost < cost) {
          pose = trial;
          cost = trial_cost;
          lambda = std::max(lambda / 10.0, 1e-12);
          accepted = true;
        } else {
          lambda *= 10.0;
        }
      }
      if (lambda > opt.max_damping) {
        out.status = EstimateStatus::no_convergence;
        break;
      }
    }
    if (small_step) {
      out.status = EstimateStatus::converged;
      break;
    }
    if (out.status == EstimateStatus::no_convergence) break;
    problem.evaluate(pose, r, &jac);
  }

  out.pose = pose;
  Eigen::VectorXd final_r;
  out.residual_rms = detail::rms(problem.evaluate(pose, final_r, nullptr));
  finalize_rotation(out);
  return out;
}

}  // namespace rbl
