#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "rbl/error.hpp"
#include "rbl/geometry.hpp"
#include "rbl/hull.hpp"
#include "rbl/random.hpp"

namespace rbl {

inline constexpr double kAbsent = std::numeric_limits<double>::quiet_NaN();

/// Wraps an angle to (−π, π].
inline double wrap_angle(double a) {
  a = std::remainder(a, 2.0 * std::numbers::pi);
  if (a <= -std::numbers::pi) a += 2.0 * std::numbers::pi;
  return a;
}

/// World-frame anchor positions, one per row.
class AnchorSet {
 public:
  explicit AnchorSet(Points positions) : positions_(std::move(positions)) {
    if (positions_.rows() < 1) throw Error(ErrorCode::invalid_anchors, "at least one anchor is required");
    if (!positions_.allFinite()) throw Error(ErrorCode::invalid_anchors, "anchor coordinates must be finite");
    for (Eigen::Index i = 0; i < positions_.rows(); ++i) {
      for (Eigen::Index j = i + 1; j < positions_.rows(); ++j) {
        if (positions_.row(i) == positions_.row(j)) {
          std::ostringstream os;
          os << "anchors " << i << " and " << j << " coincide";
          throw Error(ErrorCode::invalid_anchors, os.str());
        }
      }
    }
  }

  const Points& positions() const noexcept { return positions_; }
  Vec3 position(Eigen::Index j) const { return positions_.row(j).transpose(); }
  Eigen::Index size() const noexcept { return positions_.rows(); }

 private:
  Points positions_;
};

struct NoiseModel {
  double range_sigma = 0.0;       // m
  double angle_sigma = 0.0;       // rad
  double range_rate_sigma = 0.0;  // m/s
  std::uint64_t seed = 0;

  void validate() const {
    if (!(range_sigma >= 0.0) || !(angle_sigma >= 0.0) || !(range_rate_sigma >= 0.0)) {
      throw Error(ErrorCode::invalid_argument, "noise standard deviations must be non-negative");
    }
  }
};

struct MeasurementTypes {
  bool ranges = true;
  bool aoa = false;
  bool range_rates = false;
};

/// Anchor-to-node observations. Every matrix is A×K (or empty when that type
/// was not measured); entries with mask == false hold NaN, never zero.
struct MeasurementSet {
  Eigen::MatrixXd ranges;
  Eigen::MatrixXd azimuth;
  Eigen::MatrixXd elevation;
  Eigen::MatrixXd range_rates;
  Mask mask;

  Eigen::Index num_anchors() const { return mask.rows(); }
  Eigen::Index num_nodes() const { return mask.cols(); }
  bool has_ranges() const { return ranges.size() > 0; }
  bool has_aoa() const { return azimuth.size() > 0; }
  bool has_range_rates() const { return range_rates.size() > 0; }
  bool observed(Eigen::Index j, Eigen::Index k) const { return mask(j, k); }
  Eigen::Index observed_count() const { return mask.count(); }
  bool complete() const { return mask.all(); }
};

struct RangeSimulation {
  Eigen::MatrixXd ranges;
  int clamped = 0;  // noisy ranges that went negative and were clamped to 0
};

inline RangeSimulation simulate_ranges(const AnchorSet& anchors, const Points& world_nodes, const NoiseModel& noise,
                                       Rng& rng) {
  noise.validate();
  RangeSimulation out;
  out.ranges.resize(anchors.size(), world_nodes.rows());
  for (Eigen::Index j = 0; j < anchors.size(); ++j) {
    for (Eigen::Index k = 0; k < world_nodes.rows(); ++k) {
      double r = (anchors.positions().row(j) - world_nodes.row(k)).norm() + rng.normal(noise.range_sigma);
      if (r < 0.0) {
        r = 0.0;
        ++out.clamped;
      }
      out.ranges(j, k) = r;
    }
  }
  return out;
}

struct Bearing {
  double azimuth;
  double elevation;
};

/// Noise-free world-frame bearing of `delta`; azimuth is 0 at the poles.
inline Bearing bearing_of(const Vec3& delta) {
  const double rho = delta.norm();
  if (!(rho > 0.0)) throw Error(ErrorCode::undefined_bearing, "node coincides with anchor");
  const double horizontal = std::hypot(delta.x(), delta.y());
  const double az = horizontal <= 1e-12 * rho ? 0.0 : std::atan2(delta.y(), delta.x());
  const double el = std::asin(std::clamp(delta.z() / rho, -1.0, 1.0));
  return {wrap_angle(az), el};
}

struct AoaSimulation {
  Eigen::MatrixXd azimuth;
  Eigen::MatrixXd elevation;
};

inline AoaSimulation simulate_aoa(const AnchorSet& anchors, const Points& world_nodes, const NoiseModel& noise,
                                  Rng& rng) {
  noise.validate();
  AoaSimulation out;
  out.azimuth.resize(anchors.size(), world_nodes.rows());
  out.elevation.resize(anchors.size(), world_nodes.rows());
  for (Eigen::Index j = 0; j < anchors.size(); ++j) {
    for (Eigen::Index k = 0; k < world_nodes.rows(); ++k) {
      const Bearing b = bearing_of((world_nodes.row(k) - anchors.positions().row(j)).transpose());
      out.azimuth(j, k) = wrap_angle(b.azimuth + rng.normal(noise.angle_sigma));
      out.elevation(j, k) = b.elevation + rng.normal(noise.angle_sigma);
    }
  }
  return out;
}

/// Azimuth differences against a reference anchor; rows keep anchor order with
/// the reference row removed.
inline Eigen::MatrixXd simulate_adoa(const Eigen::MatrixXd& azimuth, Eigen::Index reference_anchor) {
  if (azimuth.rows() < 2) throw Error(ErrorCode::insufficient_anchors, "angle differences need at least 2 anchors");
  if (reference_anchor < 0 || reference_anchor >= azimuth.rows()) {
    throw Error(ErrorCode::invalid_argument, "reference anchor index out of range");
  }
  Eigen::MatrixXd out(azimuth.rows() - 1, azimuth.cols());
  Eigen::Index row = 0;
  for (Eigen::Index j = 0; j < azimuth.rows(); ++j) {
    if (j == reference_anchor) continue;
    for (Eigen::Index k = 0; k < azimuth.cols(); ++k) {
      out(row, k) = wrap_angle(azimuth(j, k) - azimuth(reference_anchor, k));
    }
    ++row;
  }
  return out;
}

inline Eigen::MatrixXd simulate_range_rates(const AnchorSet& anchors, const RigidBodyState& state,
                                            const NoiseModel& noise, Rng& rng) {
  noise.validate();
  const Points world = apply_pose(state.conformation, state.pose);
  const Points velocity = node_velocities(state);
  Eigen::MatrixXd out(anchors.size(), world.rows());
  for (Eigen::Index j = 0; j < anchors.size(); ++j) {
    for (Eigen::Index k = 0; k < world.rows(); ++k) {
      const Vec3 delta = (world.row(k) - anchors.positions().row(j)).transpose();
      const double rho = delta.norm();
      if (!(rho > 0.0)) throw Error(ErrorCode::undefined_bearing, "node coincides with anchor");
      out(j, k) = delta.dot(velocity.row(k).transpose()) / rho + rng.normal(noise.range_rate_sigma);
    }
  }
  return out;
}

/// Simulates every enabled measurement type for one body state, all entries observed.
inline MeasurementSet simulate_measurements(const AnchorSet& anchors, const RigidBodyState& state,
                                            const NoiseModel& noise, const MeasurementTypes& types, Rng& rng,
                                            int* clamped = nullptr) {
  const Points world = apply_pose(state.conformation, state.pose);
  MeasurementSet m;
  m.mask = Mask::Constant(anchors.size(), world.rows(), true);
  if (types.ranges) {
    auto sim = simulate_ranges(anchors, world, noise, rng);
    m.ranges = std::move(sim.ranges);
    if (clamped) *clamped = sim.clamped;
  }
  if (types.aoa) {
    auto sim = simulate_aoa(anchors, world, noise, rng);
    m.azimuth = std::move(sim.azimuth);
    m.elevation = std::move(sim.elevation);
  }
  if (types.range_rates) m.range_rates = simulate_range_rates(anchors, state, noise, rng);
  return m;
}

/// Clears entry (j, k) in every populated matrix.
inline void mark_absent(MeasurementSet& m, Eigen::Index j, Eigen::Index k) {
  m.mask(j, k) = false;
  for (Eigen::MatrixXd* values : {&m.ranges, &m.azimuth, &m.elevation, &m.range_rates}) {
    if (values->size() > 0) (*values)(j, k) = kAbsent;
  }
}

struct BernoulliBlockage {
  double probability = 0.0;
};

/// Blocks a link when the segment from the anchor to a point `margin` meters
/// short of the node crosses the convex hull of the body's world nodes.
struct HullOcclusion {
  Points world_nodes;
  double margin = 1e-6;
};

struct ExplicitMask {
  Mask mask;  // true = keep
};

using BlockagePolicy = std::variant<BernoulliBlockage, HullOcclusion, ExplicitMask>;

struct BlockageResult {
  MeasurementSet measurements;
  Eigen::Index newly_blocked = 0;
  std::vector<Eigen::Index> unobserved_nodes;  // nodes left with no observed anchor
  std::vector<std::string> warnings;
};

inline Mask hull_occlusion_mask(const AnchorSet& anchors, const HullOcclusion& policy) {
  const auto hull = convex_hull_halfspaces(policy.world_nodes);
  Mask visible(anchors.size(), policy.world_nodes.rows());
  for (Eigen::Index j = 0; j < anchors.size(); ++j) {
    const Vec3 a = anchors.position(j);
    for (Eigen::Index k = 0; k < policy.world_nodes.rows(); ++k) {
      const Vec3 s = policy.world_nodes.row(k).transpose();
      const double length = (s - a).norm();
      if (length <= policy.margin) {
        visible(j, k) = true;
        continue;
      }
      const Vec3 end = s - (s - a) * (policy.margin / length);
      visible(j, k) = !segment_intersects(a, end, hull);
    }
  }
  return visible;
}

inline BlockageResult apply_blockage(const MeasurementSet& meas, const BlockagePolicy& policy,
                                     const AnchorSet& anchors, Rng& rng) {
  BlockageResult out{meas, 0, {}, {}};
  MeasurementSet& m = out.measurements;
  Mask keep = Mask::Constant(m.num_anchors(), m.num_nodes(), true);

  if (const auto* p = std::get_if<BernoulliBlockage>(&policy)) {
    if (!(p->probability >= 0.0 && p->probability <= 1.0)) {
      throw Error(ErrorCode::invalid_policy, "blockage probability must lie in [0, 1]");
    }
    for (Eigen::Index j = 0; j < keep.rows(); ++j) {
      for (Eigen::Index k = 0; k < keep.cols(); ++k) keep(j, k) = !rng.bernoulli(p->probability);
    }
  } else if (const auto* h = std::get_if<HullOcclusion>(&policy)) {
    if (!(h->margin >= 0.0)) throw Error(ErrorCode::invalid_policy, "hull margin must be non-negative");
    if (h->world_nodes.rows() != m.num_nodes() || anchors.size() != m.num_anchors()) {
      throw Error(ErrorCode::invalid_policy, "hull policy dimensions do not match the measurement set");
    }
    keep = hull_occlusion_mask(anchors, *h);
  } else if (const auto* e = std::get_if<ExplicitMask>(&policy)) {
    if (e->mask.rows() != m.num_anchors() || e->mask.cols() != m.num_nodes()) {
      throw Error(ErrorCode::invalid_policy, "explicit mask has the wrong shape");
    }
    keep = e->mask;
  }

  for (Eigen::Index j = 0; j < keep.rows(); ++j) {
    for (Eigen::Index k = 0; k < keep.cols(); ++k) {
      if (m.mask(j, k) && !keep(j, k)) {
        mark_absent(m, j, k);
        ++out.newly_blocked;
      }
    }
  }
  for (Eigen::Index k = 0; k < m.num_nodes(); ++k) {
    if (!m.mask.col(k).any()) out.unobserved_nodes.push_back(k);
  }
  if (!out.unobserved_nodes.empty()) {
    std::ostringstream os;
    os << out.unobserved_nodes.size() << " node(s) have no observed anchor:";
    for (auto k : out.unobserved_nodes) os << ' ' << k;
    out.warnings.push_back(os.str());
  }
  return out;
}

/// Hollow squared EDM over anchors (first) and body nodes (second). Unknown
/// entries hold NaN and are flagged false in `known`.
class Edm {
 public:
  Edm(Eigen::MatrixXd squared, Mask known, Eigen::Index num_anchors)
      : squared_(std::move(squared)), known_(std::move(known)), num_anchors_(num_anchors) {
    const Eigen::Index n = squared_.rows();
    if (squared_.cols() != n || known_.rows() != n || known_.cols() != n) {
      throw Error(ErrorCode::invalid_argument, "EDM and mask must be square and equally sized");
    }
    if (num_anchors_ < 0 || num_anchors_ > n) throw Error(ErrorCode::invalid_argument, "bad anchor count");
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!known_(i, i) || squared_(i, i) != 0.0) throw Error(ErrorCode::invalid_argument, "EDM must be hollow");
      for (Eigen::Index j = i + 1; j < n; ++j) {
        if (known_(i, j) != known_(j, i)) throw Error(ErrorCode::invalid_argument, "mask must be symmetric");
        if (known_(i, j)) {
          if (!(squared_(i, j) >= 0.0) || squared_(i, j) != squared_(j, i)) {
            throw Error(ErrorCode::invalid_argument, "known entries must be symmetric and non-negative");
          }
        } else {
          squared_(i, j) = squared_(j, i) = kAbsent;
        }
      }
    }
  }

  const Eigen::MatrixXd& squared() const noexcept { return squared_; }
  const Mask& known() const noexcept { return known_; }
  Eigen::Index size() const noexcept { return squared_.rows(); }
  Eigen::Index num_anchors() const noexcept { return num_anchors_; }
  Eigen::Index num_nodes() const noexcept { return size() - num_anchors_; }
  Eigen::Index unknown_count() const { return (known_.size() - known_.count()) / 2; }
  bool complete() const { return known_.all(); }

 private:
  Eigen::MatrixXd squared_;
  Mask known_;
  Eigen::Index num_anchors_;
};

inline Edm assemble_edm(const AnchorSet& anchors, const Conformation& conf, const MeasurementSet& meas) {
  const Eigen::Index na = anchors.size();
  const Eigen::Index nk = conf.size();
  if (meas.num_anchors() != na || meas.num_nodes() != nk || !meas.has_ranges()) {
    throw Error(ErrorCode::invalid_argument, "measurement set does not match anchors and conformation");
  }
  const Eigen::Index n = na + nk;
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  Mask known = Mask::Constant(n, n, true);
  d.topLeftCorner(na, na) = squared_distance_matrix(anchors.positions());
  d.bottomRightCorner(nk, nk) = conf.squared_distances();
  for (Eigen::Index j = 0; j < na; ++j) {
    for (Eigen::Index k = 0; k < nk; ++k) {
      const bool seen = meas.mask(j, k);
      const double value = seen ? meas.ranges(j, k) * meas.ranges(j, k) : kAbsent;
      d(j, na + k) = d(na + k, j) = value;
      known(j, na + k) = known(na + k, j) = seen;
    }
  }
  return Edm(std::move(d), std::move(known), na);
}

/// Baseline that treats missing cross entries as measured zeros.
inline Edm zero_impute(const Edm& edm) {
  Eigen::MatrixXd d = edm.squared();
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    for (Eigen::Index j = 0; j < d.cols(); ++j) {
      if (!edm.known()(i, j)) d(i, j) = 0.0;
    }
  }
  return Edm(std::move(d), Mask::Constant(edm.size(), edm.size(), true), edm.num_anchors());
}

}  // namespace rbl
