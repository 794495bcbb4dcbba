#pragma once

#include <optional>

#include "rbl/completion.hpp"
#include "rbl/geometry.hpp"
#include "rbl/mds.hpp"
#include "rbl/measurement.hpp"
#include "rbl/nls.hpp"

namespace rbl {

struct RelativeOptions {
  MissingEntryStrategy missing = MissingEntryStrategy::complete;
  bool refine = false;  // NLS polish on the observed cross distances
  CompletionOptions completion;
  NlsOptions nls;
};

struct RelativePoseResult {
  PoseEstimate estimate;
  std::optional<CompletionReport> completion;
};

/// Anchorless pose of a target body in the ego body's frame from cross-body
/// distances. The ego nodes act as anchors.
inline RelativePoseResult estimate_relative_pose(const Conformation& ego, const Eigen::MatrixXd& cross_distances,
                                                 const Mask& mask, const Conformation& target,
                                                 const RelativeOptions& options = {}) {
  if (cross_distances.rows() != ego.size() || cross_distances.cols() != target.size() ||
      mask.rows() != ego.size() || mask.cols() != target.size()) {
    throw Error(ErrorCode::invalid_argument, "cross distances must be K_ego × K_target");
  }
  const AnchorSet anchors(ego.nodes());
  MeasurementSet meas;
  meas.mask = mask;
  meas.ranges = cross_distances;
  for (Eigen::Index j = 0; j < mask.rows(); ++j) {
    for (Eigen::Index k = 0; k < mask.cols(); ++k) {
      if (!mask(j, k)) meas.ranges(j, k) = kAbsent;
    }
  }

  auto pipeline = mds_from_ranges(meas, anchors, target, options.missing, options.completion);
  RelativePoseResult out{std::move(pipeline.estimate), std::move(pipeline.completion)};
  if (options.refine) {
    NlsOptions nls = options.nls;
    nls.init = out.estimate.pose;
    nls.use_aoa = nls.use_adoa = false;
    out.estimate = estimate_pose_nls(meas, anchors, target, nls);
    out.estimate.method = "relative-nls";
  } else {
    out.estimate.method = "relative-" + out.estimate.method;
  }
  return out;
}

}  // namespace rbl
