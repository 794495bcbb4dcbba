#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "rbl/completion.hpp"
#include "rbl/estimators.hpp"
#include "rbl/harness/presets.hpp"
#include "test_support.hpp"

using namespace rbl;
using test::random_pose;

namespace {

constexpr double kPi = std::numbers::pi;

double weighted_cost(const Points& src, const Points& dst, const Eigen::VectorXd& w, const Mat3& r, const Vec3& t) {
  double c = 0.0;
  for (Eigen::Index k = 0; k < src.rows(); ++k) {
    c += w(k) * (r * src.row(k).transpose() + t - dst.row(k).transpose()).squaredNorm();
  }
  return c;
}

// For a fixed rotation the optimal translation is the weighted centroid offset.
double best_cost_for_rotation(const Points& src, const Points& dst, const Eigen::VectorXd& w, const Mat3& r) {
  const Vec3 t = (dst.transpose() * w - r * (src.transpose() * w)) / w.sum();
  return weighted_cost(src, dst, w, r, t);
}

struct PoseErrors {
  double rotation_deg;
  double translation_m;
};

PoseErrors errors(const Pose& est, const Pose& truth) {
  return {rotation_error_deg(est.rotation, truth.rotation), translation_error(est, truth)};
}

}  // namespace

TEST(Procrustes, IdentityWhenTargetEqualsSource) {
  const Pose p = procrustes(test::unit_cube(), test::unit_cube());
  EXPECT_LT((p.rotation - Mat3::Identity()).norm(), 1e-12);
  EXPECT_LT(p.translation.norm(), 1e-12);
}

TEST(Procrustes, RecoversSynthesizedPose) {
  Rng rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const Points src = test::random_points(rng, 6, 2.0);
    const Pose truth = random_pose(rng, 10.0);
    const auto e = errors(procrustes(src, apply_pose(src, truth)), truth);
    EXPECT_LT(e.rotation_deg, 1e-9);
    EXPECT_LT(e.translation_m, 1e-9);
    EXPECT_LT((procrustes(src, apply_pose(src, truth)).rotation - truth.rotation).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Procrustes, MirroredPlanarTargetYieldsBestProperRotation) {
  Rng rng(2);
  Points flat(5, 3);
  flat << 0, 0, 0, 1, 0, 0, 0, 2, 0, 1.5, 1, 0, -1, 0.5, 0;
  Points target = apply_pose(flat, random_pose(rng, 1.0));
  target.col(0) *= -1.0;  // reflection
  const Eigen::VectorXd w = Eigen::VectorXd::Ones(5);
  const Pose p = procrustes(flat, target);
  EXPECT_NEAR(p.rotation.determinant(), 1.0, 1e-12);
  const double best = weighted_cost(flat, target, w, p.rotation, p.translation);
  for (int i = 0; i < 100000; ++i) {
    EXPECT_LE(best, best_cost_for_rotation(flat, target, w, rng.rotation()) + 1e-12);
  }
}

TEST(Procrustes, WeightedSolutionIsOptimal) {
  Rng rng(3);
  for (int instance = 0; instance < 3; ++instance) {
    const Points src = test::random_points(rng, 5, 1.0);
    Points dst = apply_pose(src, random_pose(rng, 1.0));
    dst += test::random_points(rng, 5, 0.3);
    Eigen::VectorXd w(5);
    for (int k = 0; k < 5; ++k) w(k) = rng.uniform(0.1, 2.0);
    const Pose p = procrustes(src, dst, w);
    const double best = weighted_cost(src, dst, w, p.rotation, p.translation);
    for (int i = 0; i < 100000; ++i) {
      ASSERT_LE(best, best_cost_for_rotation(src, dst, w, rng.rotation()) + 1e-12);
    }
  }
}

TEST(Procrustes, CollinearSourceIsAmbiguous) {
  Points line(4, 3);
  line << 0, 0, 0, 1, 1, 1, 2, 2, 2, 3, 3, 3;
  try {
    procrustes(line, line);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ambiguous_alignment);
  }
}

TEST(Multilateration, CentroidOfTetrahedron) {
  Points a(4, 3);
  a << 1, 1, 1, 1, -1, -1, -1, 1, -1, -1, -1, 1;
  const AnchorSet anchors(a);
  const Vec3 node = a.colwise().mean().transpose();
  Eigen::VectorXd r(4);
  for (int j = 0; j < 4; ++j) r(j) = (anchors.position(j) - node).norm();
  const auto res = multilaterate_node(anchors, r, BoolVector::Constant(4, true));
  EXPECT_LT((res.position - node).norm(), 1e-9);
  EXPECT_FALSE(res.ambiguous);
}

TEST(Multilateration, GenericNoiselessGeometry) {
  Rng rng(4);
  const AnchorSet anchors = test::cube_anchors();
  for (int trial = 0; trial < 50; ++trial) {
    const Vec3 node = test::random_vector(rng, 1.2);
    Eigen::VectorXd r(8);
    for (int j = 0; j < 8; ++j) r(j) = (anchors.position(j) - node).norm();
    BoolVector seen = BoolVector::Constant(8, true);
    seen(trial % 8) = false;
    const auto res = multilaterate_node(anchors, r, seen);
    EXPECT_LT(res.residual_rms, 1e-9);
    EXPECT_LT((res.position - node).norm(), 1e-9);
    EXPECT_EQ(res.anchors_used, 7);
  }
}

TEST(Multilateration, CoplanarAnchorsFlagMirrorAmbiguity) {
  Points a(4, 3);
  a << 0, 0, 0, 4, 0, 0, 0, 4, 0, 4, 4, 0;
  const AnchorSet anchors(a);
  const Vec3 node(1.0, 1.5, 2.0);
  Eigen::VectorXd r(4);
  for (int j = 0; j < 4; ++j) r(j) = (anchors.position(j) - node).norm();
  const auto res = multilaterate_node(anchors, r, BoolVector::Constant(4, true));
  EXPECT_TRUE(res.ambiguous);
  const Vec3 mirror(node.x(), node.y(), -node.z());
  EXPECT_LT(std::min((res.position - node).norm(), (res.position - mirror).norm()), 1e-9);
}

TEST(Multilateration, UnderdeterminedBelowThreeAnchors) {
  const AnchorSet anchors = test::cube_anchors();
  BoolVector seen = BoolVector::Constant(8, false);
  seen(0) = seen(1) = true;
  try {
    multilaterate_node(anchors, Eigen::VectorXd::Ones(8), seen);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::underdetermined);
  }
}

TEST(EstimatePoseMds, NoiselessCubeIsExact) {
  Rng rng(5);
  const AnchorSet anchors = test::cube_anchors();
  const Conformation conf = test::cube_conformation();
  for (int trial = 0; trial < 100; ++trial) {
    const Pose truth = random_pose(rng);
    const MeasurementSet m = test::simulate(anchors, conf, truth, 0.0, 1);
    const PoseEstimate est = estimate_pose_mds(assemble_edm(anchors, conf, m), anchors, conf);
    const auto e = errors(est.pose, truth);
    EXPECT_LT(e.rotation_deg, 1e-6);
    EXPECT_LT(e.translation_m, 1e-9);
    EXPECT_TRUE(is_rotation(est.pose.rotation, 1e-12));
  }
}

TEST(EstimatePoseMds, IdentityPose) {
  const AnchorSet anchors = test::cube_anchors();
  const Conformation conf = test::cube_conformation();
  const MeasurementSet m = test::simulate(anchors, conf, Pose::identity(), 0.0, 1);
  const PoseEstimate est = estimate_pose_mds(assemble_edm(anchors, conf, m), anchors, conf);
  EXPECT_LT((est.pose.rotation - Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LT(est.pose.translation.norm(), 1e-9);
}

TEST(EstimatePoseMds, RmseGrowsWithNoise) {
  const AnchorSet anchors = test::cube_anchors();
  const Conformation conf = test::cube_conformation();
  std::vector<double> rmse_t;
  std::vector<double> rmse_r;
  for (double sigma : {0.01, 0.1, 0.5}) {
    Rng rng(6);
    double st = 0.0;
    double sr = 0.0;
    int n = 0;
    for (int trial = 0; trial < 1000; ++trial) {
      const Pose truth = random_pose(rng);
      const MeasurementSet m = test::simulate(anchors, conf, truth, sigma, 100 + trial);
      try {
        const auto e = errors(estimate_pose_mds(assemble_edm(anchors, conf, m), anchors, conf).pose, truth);
        st += e.translation_m * e.translation_m;
        sr += e.rotation_deg * e.rotation_deg;
        ++n;
      } catch (const Error&) {
      }
    }
    rmse_t.push_back(std::sqrt(st / n));
    rmse_r.push_back(std::sqrt(sr / n));
  }
  EXPECT_LT(rmse_t[0], rmse_t[1]);
  EXPECT_LT(rmse_t[1], rmse_t[2]);
  EXPECT_LT(rmse_r[0], rmse_r[1]);
  EXPECT_LT(rmse_r[1], rmse_r[2]);
}

TEST(EstimatePoseMds, RequiresCompleteEdm) {
  const AnchorSet anchors = test::cube_anchors();
  const Conformation conf = test::cube_conformation();
  MeasurementSet m = test::simulate(anchors, conf, Pose::identity(), 0.0, 1);
  mark_absent(m, 0, 0);
  EXPECT_THROW(estimate_pose_mds(assemble_edm(anchors, conf, m), anchors, conf), Error);
  const auto piped = mds_from_ranges(m, anchors, conf);
  ASSERT_TRUE(piped.completion.has_value());
  EXPECT_LT(piped.estimate.pose.translation.norm(), 1e-8);
}

TEST(EstimatePoseNls, NoiselessRecovery) {
  Rng rng(7);
  const AnchorSet anchors = test::cube_anchors();
  const Conformation conf = test::cube_conformation();
  for (int trial = 0; trial < 50; ++trial) {
    const Pose truth = random_pose(rng);
    const MeasurementSet m = test::simulate(anchors, conf, truth, 0.0, 1);
    NlsOptions opt;
    opt.init = Pose{truth.rotation * so3_exp(Vec3(0.2, -0.1, 0.15)), truth.translation + Vec3(0.2, 0.1, -0.1)};
    const PoseEstimate est = estimate_pose_nls(m, anchors, conf, opt);
    EXPECT_EQ(est.status, EstimateStatus::converged);
    EXPECT_LT((est.pose.rotation - truth.rotation).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_LT(translation_error(est.pose, truth), 1e-8);
  }
}

TEST(EstimatePoseNls, StartingAtTruthConvergesImmediately) {
  Rng rng(8);
  const AnchorSet anchors = test::cube_anchors();
  const Conformation conf = test::cube_conformation();
  const Pose truth = random_pose(rng);
  NlsOptions opt;
  opt.init = truth;
  const PoseEstimate est = estimate_pose_nls(test::simulate(anchors, conf, truth, 0.0, 1), anchors, conf, opt);
  EXPECT_LE(est.iterations, 2);
  EXPECT_EQ(est.status, EstimateStatus::converged);
}

TEST(EstimatePoseNls, AnglesImproveRotationAccuracy) {
  const AnchorSet anchors = test::cube_anchors();
  const Conformation conf = test::cube_conformation();
  const double sr = 0.3;
  const double sa = 1.0 * kDegToRad;
  Rng rng(9);
  double se_range = 0.0;
  double se_both = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const Pose truth = random_pose(rng);
    const MeasurementSet m = test::simulate(anchors, conf, truth, sr, 5000 + trial, {true, true, false}, sa);
    NlsOptions ranges_only;
    ranges_only.range_sigma = sr;
    ranges_only.init = truth;
    NlsOptions with_angles = ranges_only;
    with_angles.use_aoa = true;
    with_angles.angle_sigma = sa;
    se_range += std::pow(rotation_error_deg(estimate_pose_nls(m, anchors, conf, ranges_only).pose.rotation,
                                            truth.rotation), 2);
    se_both += std::pow(rotation_error_deg(estimate_pose_nls(m, anchors, conf, with_angles).pose.rotation,
                                           truth.rotation), 2);
  }
  EXPECT_LT(se_both, se_range);
}

TEST(EstimatePoseNls, AzimuthDifferencesLeaveHeightUnobserved) {
  Rng rng(10);
  const AnchorSet anchors = test::cube_anchors();
  const Conformation conf = test::cube_conformation();
  const Pose truth = random_pose(rng);
  const MeasurementSet m = test::simulate(anchors, conf, truth, 0.0, 1, {true, true, false});
  NlsOptions opt;
  opt.use_ranges = false;
  opt.use_adoa = true;
  opt.init = Pose{truth.rotation * so3_exp(Vec3(0.05, 0.02, -0.03)), truth.translation + Vec3(0.05, 0, 0.02)};
  const PoseEstimate alone = estimate_pose_nls(m, anchors, conf, opt);
  EXPECT_LT(rotation_error_deg(alone.pose.rotation, truth.rotation), 1e-6);
  EXPECT_LT((alone.pose.translation - truth.translation).head<2>().norm(), 1e-8);
  EXPECT_NEAR(alone.pose.translation.z() - truth.translation.z(), 0.02, 1e-12);

  opt.use_ranges = true;
  const PoseEstimate combined = estimate_pose_nls(m, anchors, conf, opt);
  EXPECT_LT(rotation_error_deg(combined.pose.rotation, truth.rotation), 1e-6);
  EXPECT_LT(translation_error(combined.pose, truth), 1e-8);
}

TEST(EstimatePoseNls, UnderdeterminedObservationSet) {
  const AnchorSet anchors = test::cube_anchors();
  const Conformation conf = test::cube_conformation();
  MeasurementSet m = test::simulate(anchors, conf, Pose::identity(), 0.0, 1);
  for (Eigen::Index j = 0; j < 8; ++j) {
    for (Eigen::Index k = 0; k < 8; ++k) {
      if (j * 8 + k >= 5) mark_absent(m, j, k);
    }
  }
  NlsOptions opt;
  opt.init = Pose::identity();
  try {
    estimate_pose_nls(m, anchors, conf, opt);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::underdetermined);
  }
}

TEST(EstimatePoseGabp, NoiselessCubeMatchesMds) {
  Rng rng(11);
  const AnchorSet anchors = test::cube_anchors();
  const Conformation conf = test::cube_conformation();
  for (int trial = 0; trial < 50; ++trial) {
    const Pose truth = random_pose(rng);
    const MeasurementSet m = test::simulate(anchors, conf, truth, 0.0, 1);
    const GabpEstimate g = estimate_pose_gabp(m, anchors, conf);
    const PoseEstimate mds = estimate_pose_mds(assemble_edm(anchors, conf, m), anchors, conf);
    EXPECT_EQ(g.estimate.status, EstimateStatus::converged);
    EXPECT_LT(rotation_error_deg(g.estimate.pose.rotation, mds.pose.rotation), 1e-6);
    EXPECT_LT(translation_error(g.estimate.pose, mds.pose), 1e-6);
    EXPECT_TRUE((g.node_variances.array() > 0.0).all());
  }
}

namespace {

// Direct weighted least squares via the normal equations.
Eigen::Vector3d normal_equation_solve(const LinearizedRanges& sys) {
  const Eigen::MatrixXd w = sys.variance.cwiseInverse().asDiagonal();
  return (sys.design.transpose() * w * sys.design).ldlt().solve(sys.design.transpose() * w * sys.rhs);
}

}  // namespace

TEST(EstimatePoseGabp, SingleNodeTreeEqualsLinearSolve) {
  // Axis-aligned anchor offsets give one factor per coordinate: a forest.
  Points a(4, 3);
  a << 0, 0, 0, 5, 0, 0, 0, 4, 0, 0, 0, 3.5;
  const AnchorSet anchors(a);
  Rng rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    const Vec3 node(rng.uniform(0.2, 1.2), rng.uniform(0.2, 1.2), rng.uniform(0.2, 1.2));
    Eigen::VectorXd r(4);
    for (int j = 0; j < 4; ++j) r(j) = (anchors.position(j) - node).norm() + rng.normal(0.01);
    const LinearizedRanges sys = linearize_ranges(anchors, r, BoolVector::Constant(4, true), 0.01);
    ASSERT_EQ(sys.reference, 0);
    const GabpLinearResult bp = gabp_linear(sys.design, sys.rhs, sys.variance, Vec3::Zero());
    ASSERT_TRUE(bp.converged);
    EXPECT_LT((bp.mean - normal_equation_solve(sys)).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(EstimatePoseGabp, LoopyCubeSystemConvergesToLinearSolve) {
  const AnchorSet anchors = test::cube_anchors();
  Rng rng(20);
  for (int trial = 0; trial < 50; ++trial) {
    const Vec3 node = test::random_vector(rng, 1.0);
    Eigen::VectorXd r(8);
    for (int j = 0; j < 8; ++j) r(j) = (anchors.position(j) - node).norm() + rng.normal(0.05);
    const LinearizedRanges sys = linearize_ranges(anchors, r, BoolVector::Constant(8, true), 0.05);
    const GabpLinearResult bp = gabp_linear(sys.design, sys.rhs, sys.variance, Vec3::Zero());
    ASSERT_TRUE(bp.converged);
    EXPECT_LT((bp.mean - normal_equation_solve(sys)).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(EstimatePoseGabp, ComparableToNlsAcrossNoise) {
  const AnchorSet anchors = test::cube_anchors();
  const Conformation conf = test::cube_conformation();
  for (double sigma : {0.01, 0.05, 0.2}) {
    Rng rng(13);
    double g_t = 0.0, g_r = 0.0, n_t = 0.0, n_r = 0.0;
    for (int trial = 0; trial < 300; ++trial) {
      const Pose truth = random_pose(rng);
      const MeasurementSet m = test::simulate(anchors, conf, truth, sigma, 9000 + trial);
      const auto g = errors(estimate_pose_gabp(m, anchors, conf).estimate.pose, truth);
      NlsOptions opt;
      opt.range_sigma = sigma;
      const auto n = errors(estimate_pose_nls(m, anchors, conf, opt).pose, truth);
      g_t += g.translation_m * g.translation_m;
      g_r += g.rotation_deg * g.rotation_deg;
      n_t += n.translation_m * n.translation_m;
      n_r += n.rotation_deg * n.rotation_deg;
    }
    EXPECT_LT(std::sqrt(g_t / n_t), 2.0) << sigma;
    EXPECT_LT(std::sqrt(g_r / n_r), 2.0) << sigma;
  }
}

TEST(EstimatePoseGabp, NeedsFourAnchorsPerNode) {
  const AnchorSet anchors = test::cube_anchors();
  const Conformation conf = test::cube_conformation();
  MeasurementSet m = test::simulate(anchors, conf, Pose::identity(), 0.0, 1);
  for (Eigen::Index j = 3; j < 8; ++j) mark_absent(m, j, 2);
  try {
    estimate_pose_gabp(m, anchors, conf);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::underdetermined);
  }
}

TEST(Estimators, EquivariantUnderWorldRotation) {
  Rng rng(14);
  const Conformation conf = test::cube_conformation();
  for (int trial = 0; trial < 10; ++trial) {
    const Pose truth = random_pose(rng);
    const Mat3 w = rng.rotation();
    const AnchorSet anchors = test::cube_anchors();
    const AnchorSet rotated(Points(anchors.positions() * w.transpose()));
    const Pose truth_rot{w * truth.rotation, w * truth.translation};
    const MeasurementSet m = test::simulate(anchors, conf, truth, 0.0, 1);
    const MeasurementSet mr = test::simulate(rotated, conf, truth_rot, 0.0, 1);

    auto check = [&](const Pose& a, const Pose& b) {
      EXPECT_LT((w * a.rotation - b.rotation).cwiseAbs().maxCoeff(), 1e-8);
      EXPECT_LT((w * a.translation - b.translation).norm(), 1e-8);
    };
    check(mds_from_ranges(m, anchors, conf).estimate.pose, mds_from_ranges(mr, rotated, conf).estimate.pose);
    check(estimate_pose_nls(m, anchors, conf).pose, estimate_pose_nls(mr, rotated, conf).pose);
    check(estimate_pose_gabp(m, anchors, conf).estimate.pose, estimate_pose_gabp(mr, rotated, conf).estimate.pose);
  }
}

namespace {

Pose vehicle_pose(Rng& rng) {
  return {so3_exp(Vec3(0, 0, rng.uniform(-0.35, 0.35))),
          Vec3(rng.uniform(10.0, 16.0), rng.uniform(-3.5, 3.5), 0.0)};
}

Eigen::MatrixXd cross_distances(const Conformation& ego, const Conformation& target, const Pose& rel, double sigma,
                                Rng& rng) {
  const Points world = apply_pose(target, rel);
  Eigen::MatrixXd d(ego.size(), target.size());
  for (Eigen::Index j = 0; j < ego.size(); ++j) {
    for (Eigen::Index k = 0; k < target.size(); ++k) {
      d(j, k) = (ego.nodes().row(j) - world.row(k)).norm() + rng.normal(sigma);
    }
  }
  return d;
}

}  // namespace

TEST(EstimateRelativePose, TruckAndCarNoiseless) {
  const Conformation truck(presets::truck_body());
  const Conformation car(presets::car_body());
  Rng rng(15);
  for (int trial = 0; trial < 50; ++trial) {
    const Pose rel = vehicle_pose(rng);
    const Eigen::MatrixXd d = cross_distances(truck, car, rel, 0.0, rng);
    const auto res = estimate_relative_pose(truck, d, Mask::Constant(10, 8, true), car);
    EXPECT_LT((res.estimate.pose.rotation - rel.rotation).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_LT(translation_error(res.estimate.pose, rel), 1e-8);
    RelativeOptions refine;
    refine.refine = true;
    const auto refined = estimate_relative_pose(truck, d, Mask::Constant(10, 8, true), car, refine);
    EXPECT_LT(translation_error(refined.estimate.pose, rel), 1e-8);
  }
}

TEST(EstimateRelativePose, IdenticalBodyAtIdentity) {
  const Conformation truck(presets::truck_body());
  Rng rng(16);
  const Eigen::MatrixXd d = cross_distances(truck, truck, Pose::identity(), 0.0, rng);
  const auto res = estimate_relative_pose(truck, d, Mask::Constant(10, 10, true), truck);
  EXPECT_LT((res.estimate.pose.rotation - Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_LT(res.estimate.pose.translation.norm(), 1e-8);
}

TEST(EstimateRelativePose, CompletionBeatsZeroImputation) {
  const Conformation truck(presets::truck_body());
  const Conformation car(presets::car_body());
  Rng rng(17);
  double mse_complete = 0.0;
  double mse_zero = 0.0;
  int used = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const Pose rel = vehicle_pose(rng);
    const Eigen::MatrixXd d = cross_distances(truck, car, rel, 0.1, rng);
    Mask mask(10, 8);
    for (Eigen::Index i = 0; i < mask.size(); ++i) mask(i) = !rng.bernoulli(0.2);
    try {
      RelativeOptions zero;
      zero.missing = MissingEntryStrategy::zero_impute;
      const auto a = estimate_relative_pose(truck, d, mask, car);
      const auto b = estimate_relative_pose(truck, d, mask, car, zero);
      mse_complete += std::pow(translation_error(a.estimate.pose, rel), 2);
      mse_zero += std::pow(translation_error(b.estimate.pose, rel), 2);
      ++used;
    } catch (const Error&) {
    }
  }
  EXPECT_GT(used, 450);
  EXPECT_LT(mse_complete, mse_zero);
}

TEST(SemanticTransform, IdentityAndQuarterTurn) {
  SemanticHeading h;
  h.body_vector = Vec3::UnitX();
  EXPECT_EQ(semantic_transform(h, Pose::identity()).world_vector, Vec3::UnitX());
  const SemanticHeading turned = semantic_transform(h, Pose{test::rot_z(kPi / 2), Vec3(1, 2, 3)});
  EXPECT_LT((turned.world_vector - Vec3::UnitY()).norm(), 1e-15);
  EXPECT_EQ(turned.anchor_point, Vec3(1, 2, 3));
}

TEST(SemanticTransform, PreservesUnitNorm) {
  Rng rng(18);
  for (int i = 0; i < 10000; ++i) {
    SemanticHeading h;
    h.body_vector = test::random_vector(rng).normalized();
    EXPECT_NEAR(semantic_transform(h, random_pose(rng)).world_vector.norm(), 1.0, 1e-12);
  }
}

TEST(SemanticTransform, RejectsNonUnitHeading) {
  SemanticHeading h;
  h.body_vector = Vec3(1, 1, 0);
  try {
    semantic_transform(h, Pose::identity());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::invalid_heading);
  }
}

TEST(SemanticError, ZeroOppositeAndProjection) {
  SemanticHeading a;
  a.world_vector = Vec3::UnitZ();
  const auto same = semantic_error(a, a);
  EXPECT_EQ(same.angle_deg, 0.0);
  EXPECT_EQ(same.offset_m, 0.0);
  SemanticHeading b = a;
  b.world_vector = -Vec3::UnitZ();
  EXPECT_NEAR(semantic_error(a, b).angle_deg, 180.0, 1e-12);

  Rng rng(19);
  for (int i = 0; i < 200; ++i) {
    SemanticHeading h;
    h.body_vector = test::random_vector(rng).normalized();
    const Pose truth = random_pose(rng);
    const Pose est{truth.rotation * so3_exp(test::random_vector(rng, 0.2)), truth.translation + test::random_vector(rng, 0.1)};
    const auto e = semantic_error(semantic_transform(h, truth), semantic_transform(h, est));
    const Vec3 vt = truth.rotation * h.body_vector;
    const Vec3 ve = est.rotation * h.body_vector;
    EXPECT_NEAR(e.angle_deg, std::acos(std::clamp(vt.dot(ve), -1.0, 1.0)) * kRadToDeg, 1e-6);
    EXPECT_LE(e.angle_deg, rotation_error_deg(truth.rotation, est.rotation) + 1e-9);
    EXPECT_NEAR(e.offset_m, translation_error(est, truth), 1e-12);
  }
}
