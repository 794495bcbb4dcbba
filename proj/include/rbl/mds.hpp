#pragma once

#include <cmath>
#include <limits>
#include <optional>

#include "rbl/completion.hpp"
#include "rbl/error.hpp"
#include "rbl/geometry.hpp"
#include "rbl/measurement.hpp"
#include "rbl/procrustes.hpp"

namespace rbl {

/// Classical MDS on the joint anchor + node EDM. The embedding is fixed to the
/// world frame by aligning its anchor rows to the known anchors (a mirrored
/// embedding is tried as well), then the conformation is aligned to the
/// recovered node positions.
inline PoseEstimate estimate_pose_mds(const Edm& edm, const AnchorSet& anchors, const Conformation& conf) {
  if (!edm.complete()) throw Error(ErrorCode::incomplete_input, "MDS needs a fully known EDM; complete it first");
  if (edm.num_anchors() != anchors.size() || edm.num_nodes() != conf.size()) {
    throw Error(ErrorCode::invalid_argument, "EDM dimensions do not match anchors and conformation");
  }
  const Embedding emb = embed_gram(gram_from_edm(edm), 3);
  const double top = emb.eigenvalues(0);
  if (!(top > 0.0) || emb.eigenvalues.size() < 3 || !(emb.eigenvalues(2) > 1e-9 * top)) {
    throw Error(ErrorCode::degenerate_embedding, "Gram matrix has fewer than 3 significant positive eigenvalues");
  }

  const Eigen::Index na = anchors.size();
  const Eigen::Index nk = conf.size();
  Points best_nodes;
  double best_rms = std::numeric_limits<double>::infinity();
  for (const double mirror : {1.0, -1.0}) {
    Points x = emb.points;
    x.col(2) *= mirror;
    const Points xa = x.topRows(na);
    const Pose to_world = procrustes(xa, anchors.positions());
    const double rms = alignment_rms(xa, anchors.positions(), to_world);
    if (rms < best_rms) {
      best_rms = rms;
      best_nodes = apply_pose(Points(x.bottomRows(nk)), to_world);
    }
  }

  PoseEstimate out;
  out.method = "mds";
  out.pose = procrustes(conf.nodes(), best_nodes);
  out.residual_rms = alignment_rms(conf.nodes(), best_nodes, out.pose);
  out.node_positions = std::move(best_nodes);
  out.iterations = 1;
  finalize_rotation(out);
  return out;
}

enum class MissingEntryStrategy { complete, zero_impute };

struct MdsPipelineResult {
  PoseEstimate estimate;
  std::optional<CompletionReport> completion;
};

/// Range measurements → EDM → (completion or zero imputation when masked) → MDS.
inline MdsPipelineResult mds_from_ranges(const MeasurementSet& meas, const AnchorSet& anchors,
                                         const Conformation& conf,
                                         MissingEntryStrategy missing = MissingEntryStrategy::complete,
                                         const CompletionOptions& completion = {}) {
  const Edm edm = assemble_edm(anchors, conf, meas);
  MdsPipelineResult out;
  if (edm.complete()) {
    out.estimate = estimate_pose_mds(edm, anchors, conf);
  } else if (missing == MissingEntryStrategy::zero_impute) {
    out.estimate = estimate_pose_mds(zero_impute(edm), anchors, conf);
    out.estimate.method = "mds-zero-impute";
  } else {
    out.completion = complete_edm(edm, completion);
    out.estimate = estimate_pose_mds(out.completion->completed, anchors, conf);
    out.estimate.method = "mds-completed";
  }
  return out;
}

}  // namespace rbl
