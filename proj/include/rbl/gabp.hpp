#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "rbl/error.hpp"
#include "rbl/geometry.hpp"
#include "rbl/measurement.hpp"
#include "rbl/multilateration.hpp"
#include "rbl/procrustes.hpp"

namespace rbl {

struct GabpOptions {
  double damping = 0.5;  // weight of the previous message
  int max_sweeps = 100;
  double tol = 1e-12;  // m, max change of any belief mean between sweeps
  double range_sigma = 1.0;
  double initial_precision = 1.0;  // precision of the initial variable→factor messages
};

struct GabpLinearResult {
  Eigen::VectorXd mean;
  Eigen::VectorXd variance;  // marginal variances
  int sweeps = 0;
  bool converged = false;
  bool diverged = false;
};

/// Gaussian belief propagation for z = H·x + n, n ~ N(0, diag(variance)), on the
/// factor graph with one variable node per unknown and one factor node per row.
/// Messages are scalar Gaussians kept in (mean, precision) form. `initial_mean`
/// only seeds the first variable→factor messages; it is not a prior.
inline GabpLinearResult gabp_linear(const Eigen::MatrixXd& design, const Eigen::VectorXd& rhs,
                                    const Eigen::VectorXd& variance, const Eigen::VectorXd& initial_mean,
                                    const GabpOptions& opt = {}) {
  const Eigen::Index m = design.rows();
  const Eigen::Index n = design.cols();
  if (rhs.size() != m || variance.size() != m || initial_mean.size() != n) {
    throw Error(ErrorCode::invalid_argument, "inconsistent linear system dimensions");
  }
  if (!(opt.damping >= 0.0 && opt.damping < 1.0) || opt.max_sweeps < 1) {
    throw Error(ErrorCode::invalid_argument, "bad belief propagation options");
  }
  const double hmax = design.cwiseAbs().maxCoeff();
  const Mask edge = (design.cwiseAbs().array() > 1e-12 * hmax).matrix();

  // Factor→variable and variable→factor messages, indexed (factor, variable).
  Eigen::MatrixXd f_mean = Eigen::MatrixXd::Zero(m, n);
  Eigen::MatrixXd f_prec = Eigen::MatrixXd::Zero(m, n);
  Eigen::MatrixXd v_mean = initial_mean.transpose().replicate(m, 1);
  Eigen::MatrixXd v_prec = Eigen::MatrixXd::Constant(m, n, opt.initial_precision);

  GabpLinearResult out;
  out.mean = initial_mean;
  out.variance = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::infinity());
  Eigen::VectorXd belief_mean = initial_mean;
  Eigen::VectorXd belief_prec(n);

  for (int sweep = 1; sweep <= opt.max_sweeps; ++sweep) {
    for (Eigen::Index f = 0; f < m; ++f) {
      // Variable→factor messages of zero precision are uninformative and make
      // the factor's messages to every other variable uninformative too.
      double pred = 0.0;
      double spread = variance(f);
      int vague = 0;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (!edge(f, i)) continue;
        if (v_prec(f, i) <= 0.0) {
          ++vague;
          continue;
        }
        pred += design(f, i) * v_mean(f, i);
        spread += design(f, i) * design(f, i) / v_prec(f, i);
      }
      for (Eigen::Index i = 0; i < n; ++i) {
        if (!edge(f, i)) continue;
        const double h = design(f, i);
        const bool self_vague = v_prec(f, i) <= 0.0;
        double prec = 0.0;
        double mean = 0.0;
        if (vague - (self_vague ? 1 : 0) == 0) {
          const double others_var = self_vague ? spread : spread - h * h / v_prec(f, i);
          const double others_pred = self_vague ? pred : pred - h * v_mean(f, i);
          prec = h * h / others_var;
          mean = (rhs(f) - others_pred) / h;
        }
        if (sweep == 1) {
          f_prec(f, i) = prec;
          f_mean(f, i) = mean;
        } else {
          const double eta = opt.damping * f_prec(f, i) * f_mean(f, i) + (1.0 - opt.damping) * prec * mean;
          f_prec(f, i) = opt.damping * f_prec(f, i) + (1.0 - opt.damping) * prec;
          f_mean(f, i) = f_prec(f, i) > 0.0 ? eta / f_prec(f, i) : 0.0;
        }
      }
    }

    bool finite = true;
    for (Eigen::Index i = 0; i < n; ++i) {
      double prec = 0.0;
      double eta = 0.0;
      for (Eigen::Index f = 0; f < m; ++f) {
        if (!edge(f, i)) continue;
        prec += f_prec(f, i);
        eta += f_prec(f, i) * f_mean(f, i);
      }
      belief_prec(i) = prec;
      belief_mean(i) = eta / prec;
      if (!(prec > 0.0) || !std::isfinite(prec) || !std::isfinite(belief_mean(i))) finite = false;
    }
    if (!finite) {
      out.diverged = true;
      out.sweeps = sweep;
      return out;
    }
    for (Eigen::Index f = 0; f < m; ++f) {
      for (Eigen::Index i = 0; i < n; ++i) {
        if (!edge(f, i)) continue;
        double prec = belief_prec(i) - f_prec(f, i);
        if (prec < -1e-9 * belief_prec(i)) {
          out.diverged = true;
          out.sweeps = sweep;
          return out;
        }
        if (prec <= 1e-12 * belief_prec(i)) {
          v_prec(f, i) = 0.0;  // no other factor informs this variable
          v_mean(f, i) = belief_mean(i);
          continue;
        }
        v_prec(f, i) = prec;
        v_mean(f, i) = (belief_prec(i) * belief_mean(i) - f_prec(f, i) * f_mean(f, i)) / prec;
      }
    }

    const double change = (belief_mean - out.mean).cwiseAbs().maxCoeff();
    out.mean = belief_mean;
    out.variance = belief_prec.cwiseInverse();
    out.sweeps = sweep;
    if (sweep > 1 && change < opt.tol) {
      out.converged = true;
      return out;
    }
  }
  out.diverged = true;  // still oscillating at the sweep cap
  return out;
}

struct GabpEstimate {
  PoseEstimate estimate;
  Points node_means;
  Points node_variances;  // per-coordinate marginal variances, m²
  std::vector<int> sweeps;
};

/// Two stages: per-node belief propagation on the linearized range equations,
/// then Procrustes from the conformation to the node beliefs weighted by their
/// precisions.
inline GabpEstimate estimate_pose_gabp(const MeasurementSet& meas, const AnchorSet& anchors, const Conformation& conf,
                                       const GabpOptions& opt = {}) {
  if (!meas.has_ranges() || meas.num_anchors() != anchors.size() || meas.num_nodes() != conf.size()) {
    throw Error(ErrorCode::invalid_argument, "measurement set does not match anchors and conformation");
  }
  const Eigen::Index nk = conf.size();
  GabpEstimate out;
  out.node_means.resize(nk, 3);
  out.node_variances.resize(nk, 3);
  out.estimate.method = "gabp";
  bool diverged = false;
  const Vec3 start = anchors.positions().colwise().mean().transpose();

  for (Eigen::Index k = 0; k < nk; ++k) {
    const BoolVector observed = meas.mask.col(k);
    if (observed.count() < 4) throw Error(ErrorCode::underdetermined, "node " + std::to_string(k) + " sees < 4 anchors");
    const Eigen::VectorXd ranges = meas.ranges.col(k);
    const LinearizedRanges sys = linearize_ranges(anchors, ranges, observed, opt.range_sigma);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(sys.design);
    lu.setThreshold(1e-9);
    if (lu.rank() < 3) {
      throw Error(ErrorCode::underdetermined, "node " + std::to_string(k) + " has coplanar observed anchors");
    }
    const GabpLinearResult bp = gabp_linear(sys.design, sys.rhs, sys.variance, start, opt);
    diverged = diverged || bp.diverged;
    out.node_means.row(k) = bp.mean.transpose();
    out.node_variances.row(k) = bp.variance.transpose();
    out.sweeps.push_back(bp.sweeps);
    out.estimate.iterations = std::max(out.estimate.iterations, bp.sweeps);
  }

  Eigen::VectorXd weights(nk);
  for (Eigen::Index k = 0; k < nk; ++k) {
    const double v = out.node_variances.row(k).mean();
    weights(k) = std::isfinite(v) && v > 0.0 ? 1.0 / v : 0.0;
  }
  if (!weights.allFinite() || weights.maxCoeff() <= 0.0) weights.setOnes();
  out.estimate.pose = procrustes(conf.nodes(), out.node_means, weights);
  out.estimate.residual_rms = alignment_rms(conf.nodes(), out.node_means, out.estimate.pose);
  out.estimate.node_positions = out.node_means;
  out.estimate.status = diverged ? EstimateStatus::diverged : EstimateStatus::converged;
  finalize_rotation(out.estimate);
  return out;
}

}  // namespace rbl
