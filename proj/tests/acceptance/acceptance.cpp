// Prints one PASS/FAIL line per acceptance criterion; exit status is the
// number of failed criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "rbl/harness/benchmark.hpp"
#include "rbl/semantic.hpp"

using namespace rbl;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) detail = what;
    pass = pass && ok;
  }
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

Pose random_pose(Rng& rng, double box) {
  return {rng.rotation(), Vec3(rng.uniform(-box, box), rng.uniform(-box, box), rng.uniform(-box, box))};
}

Vec3 random_vector(Rng& rng, double scale) {
  return {rng.uniform(-scale, scale), rng.uniform(-scale, scale), rng.uniform(-scale, scale)};
}

Outcome noiseless_exactness() {
  Outcome o;
  const ScenarioConfig s = presets::fig4_scenario();
  double worst_rot = 0.0;
  double worst_trans = 0.0;
  int recovered = 0;
  for (std::uint64_t i = 0; i < 100; ++i) {
    const TrialData t = simulate_trial(s, 0.0, trial_seed(1, 0, i));
    bool all = true;
    for (const std::string est : {"mds", "nls", "gabp"}) {
      const EstimatorRun run = run_estimator(est, s, t);
      if (!run.ok()) {
        all = false;
        continue;
      }
      worst_rot = std::max(worst_rot, run.rotation_error_deg);
      worst_trans = std::max(worst_trans, run.translation_error_m);
      all = all && run.rotation_error_deg < 1e-6 && run.translation_error_m < 1e-8;
    }
    recovered += all ? 1 : 0;
  }
  o.require(recovered == 100, std::to_string(recovered) + "/100 poses recovered by all estimators");
  o.detail = o.pass ? "100/100 poses, worst " + fmt(worst_rot) + " deg, " + fmt(worst_trans) + " m" : o.detail;
  return o;
}

Outcome kinematic_consistency() {
  Outcome o;
  Rng rng(2);
  const double h = 1e-6;
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    Points nodes(6, 3);
    for (Eigen::Index k = 0; k < 6; ++k) nodes.row(k) = random_vector(rng, 1.0).transpose();
    const Conformation conf(nodes);
    const RigidBodyState s{conf, random_pose(rng, 5.0), Twist{random_vector(rng, 2.0), random_vector(rng, 5.0)}};
    RigidBodyState back = s;
    back.twist = Twist{-s.twist->angular, -s.twist->linear};
    const Points fd = (apply_pose(conf, propagate_state(s, h).pose) - apply_pose(conf, propagate_state(back, h).pose)) /
                      (2.0 * h);
    worst = std::max(worst, (fd - node_velocities(s)).cwiseAbs().maxCoeff());
  }
  o.require(worst < 1e-5, "max deviation " + fmt(worst) + " m/s");
  if (o.pass) o.detail = "max deviation " + fmt(worst) + " m/s over 100 states";
  return o;
}

// Uses the preset's own master seed; the sweep is the benchmark itself.
Outcome crlb_validity() {
  Outcome o;
  const ScenarioConfig s = presets::fig4_scenario();
  ExperimentConfig e = presets::fig4_experiment();
  e.sigma_grid = {0.01, 0.05, 0.1};
  e.estimators = {"nls"};
  std::ostringstream detail;
  for (const ResultRow& r : run_benchmark(s, e)) {
    o.require(r.failures == 0, "NLS failed on " + std::to_string(r.failures) + " trials");
    const double rt = std::pow(r.rmse_translation_m / r.crlb_translation_m, 2);
    const double rr = std::pow(r.rmse_rotation_deg / r.crlb_rotation_deg, 2);
    o.require(rt >= 1.0 && rr >= 1.0, "MSE/CRLB below 1 at sigma " + fmt(r.sigma) + ": " + fmt(rt) + " (t) " + fmt(rr) + " (R)");
    if (r.sigma == 0.01) o.require(rt <= 3.0 && rr <= 3.0, "MSE above 3x bound at sigma 0.01");
    detail << "MSE/CRLB at " << fmt(r.sigma) << ": " << fmt(rt) << " (t) " << fmt(rr) << " (R); ";
  }
  const auto rows = crlb_for_scenario(s, {1e-3, 1e-2, 1e-1, 1.0}, e.seed);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    for (double ratio : {rows[i].translation_bound / rows[i - 1].translation_bound,
                         rows[i].rotation_bound / rows[i - 1].rotation_bound}) {
      const double slope = std::log(ratio) / std::log(rows[i].sigma / rows[i - 1].sigma);
      o.require(std::abs(slope - 2.0) < 0.02, "log-log slope " + fmt(slope));
    }
  }
  o.detail = o.pass ? detail.str() + "slope 2" : o.detail + " | " + detail.str();
  return o;
}

Outcome fim_correctness() {
  Outcome o;
  Rng rng(4);
  const double h = 1e-6;
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const Vec3 anchor = random_vector(rng, 5.0);
    const Vec3 node = random_vector(rng, 1.0);
    const Pose pose = random_pose(rng, 2.0);
    const RowVector6d analytic = range_jacobian(anchor, node, pose);
    const auto range = [&](const Pose& p) { return (p.rotation * node + p.translation - anchor).norm(); };
    for (int k = 0; k < 6; ++k) {
      Pose plus = pose;
      Pose minus = pose;
      if (k < 3) {
        plus.rotation = pose.rotation * so3_exp(h * Vec3::Unit(k));
        minus.rotation = pose.rotation * so3_exp(-h * Vec3::Unit(k));
      } else {
        plus.translation(k - 3) += h;
        minus.translation(k - 3) -= h;
      }
      worst = std::max(worst, std::abs((range(plus) - range(minus)) / (2.0 * h) - analytic(k)));
    }
  }
  o.require(worst < 1e-5, "Jacobian deviation " + fmt(worst));

  const ScenarioConfig s = presets::fig4_scenario();
  double additivity = 0.0;
  for (int i = 0; i < 100; ++i) {
    const Pose pose = s.draw_pose(rng);
    Mask a(8, 8);
    for (Eigen::Index e = 0; e < a.size(); ++e) a(e) = rng.bernoulli(0.5);
    a(0) = true;
    a(1) = false;
    const Mask b = a.unaryExpr([](bool x) { return !x; });
    const Matrix6d sum = fim_ranges(s.anchors, s.conformation, pose, a, 0.1).fim +
                         fim_ranges(s.anchors, s.conformation, pose, b, 0.1).fim;
    const Matrix6d whole = fim_ranges(s.anchors, s.conformation, pose, Mask::Constant(8, 8, true), 0.1).fim;
    additivity = std::max(additivity, (whole - sum).cwiseAbs().maxCoeff() / whole.cwiseAbs().maxCoeff());
  }
  o.require(additivity < 1e-12, "additivity deviation " + fmt(additivity));
  if (o.pass) o.detail = "Jacobian " + fmt(worst) + ", additivity " + fmt(additivity) + " (relative)";
  return o;
}

Outcome completion() {
  Outcome o;
  const ScenarioConfig s = presets::fig4_scenario();
  CompletionOptions opt;
  opt.max_iters = 200;
  double worst = 0.0;
  int max_iters = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const Pose pose = s.draw_pose(rng);
    Points joint(16, 3);
    joint << s.anchors.positions(), apply_pose(s.conformation, pose);
    const Eigen::MatrixXd truth = squared_distance_matrix(joint);
    Mask known = Mask::Constant(16, 16, true);
    std::vector<int> cross(64);
    std::iota(cross.begin(), cross.end(), 0);
    std::shuffle(cross.begin(), cross.end(), rng.engine());
    for (int i = 0; i < 19; ++i) {  // 30% of the 64 anchor-node entries
      const int a = cross[static_cast<std::size_t>(i)] / 8;
      const int n = 8 + cross[static_cast<std::size_t>(i)] % 8;
      known(a, n) = known(n, a) = false;
    }
    const Edm observed(truth, known, 8);
    const CompletionReport r = complete_edm(observed, opt);
    max_iters = std::max(max_iters, r.iterations);
    for (Eigen::Index i = 0; i < 16; ++i) {
      for (Eigen::Index j = 0; j < 16; ++j) {
        const double c = r.completed.squared()(i, j);
        if (known(i, j)) {
          o.require(c == observed.squared()(i, j), "known entry changed");
        } else {
          worst = std::max(worst, std::abs(c - truth(i, j)) / truth(i, j));
        }
      }
    }
  }
  o.require(worst < 1e-6, "relative error " + fmt(worst));
  o.require(max_iters <= 200, std::to_string(max_iters) + " iterations");
  if (o.pass) o.detail = "20 draws, worst relative error " + fmt(worst) + ", at most " + std::to_string(max_iters) + " iterations";
  return o;
}

Outcome completion_benefit() {
  Outcome o;
  const ScenarioConfig s = presets::fig5_scenario();
  const double sigma = 0.1;
  std::vector<double> diff;
  std::vector<double> complete_sq, zero_sq, complete_rot, zero_rot, bound_t, bound_r;
  int failures = 0;
  for (std::uint64_t i = 0; i < 500; ++i) {
    const TrialData t = simulate_trial(s, sigma, trial_seed(6, 0, i));
    const EstimatorRun a = run_estimator("mds", s, t);
    const EstimatorRun b = run_estimator("mds-zero-impute", s, t);
    if (!a.ok() || !b.ok()) {
      ++failures;
      continue;
    }
    const double ea = a.translation_error_m * a.translation_error_m;
    const double eb = b.translation_error_m * b.translation_error_m;
    complete_sq.push_back(ea);
    zero_sq.push_back(eb);
    complete_rot.push_back(std::pow(a.rotation_error_deg / kRadToDeg, 2));
    zero_rot.push_back(std::pow(b.rotation_error_deg / kRadToDeg, 2));
    diff.push_back(eb - ea);
    if (t.crlb) {
      bound_t.push_back(t.crlb->translation_bound);
      bound_r.push_back(t.crlb->rotation_bound);
    }
  }
  const auto mean = [](const std::vector<double>& v) { return pairwise_sum(v) / static_cast<double>(v.size()); };
  o.require(diff.size() >= 450, std::to_string(failures) + " failed pairs");
  const std::size_t n = diff.size();
  Rng rng(66);
  int wins = 0;
  const int resamples = 10000;
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  for (int r = 0; r < resamples; ++r) {
    double sum = 0.0;
    for (std::size_t k = 0; k < n; ++k) sum += diff[pick(rng.engine())];
    wins += sum > 0.0 ? 1 : 0;
  }
  const double confidence = static_cast<double>(wins) / resamples;
  o.require(confidence >= 0.95, "bootstrap confidence " + fmt(confidence));
  const double crlb_t = mean(bound_t);
  const double crlb_r = mean(bound_r);
  o.require(mean(complete_sq) >= crlb_t && mean(zero_sq) >= crlb_t, "translation MSE below CRLB");
  o.require(mean(complete_rot) >= crlb_r && mean(zero_rot) >= crlb_r, "rotation MSE below CRLB");
  if (o.pass) {
    o.detail = "MSE " + fmt(mean(complete_sq)) + " (completion) vs " + fmt(mean(zero_sq)) + " (zero) vs CRLB " +
               fmt(crlb_t) + " m^2, confidence " + fmt(confidence) + ", " + std::to_string(n) + " pairs";
  }
  return o;
}

Outcome tracking() {
  Outcome o;
  Rng rng(7);
  ScenarioConfig s = presets::fig4_scenario();
  double worst_twist = 0.0;
  double worst_residual = 0.0;
  for (int run = 0; run < 20; ++run) {
    const Twist twist = run == 0 ? Twist{Vec3(0, 0, 0.1), Vec3(1, 0, 0)}
                                 : Twist{random_vector(rng, 0.5), random_vector(rng, 2.0)};
    s.pose = run == 0 ? Pose{Mat3::Identity(), Vec3(-0.5, 0, 0)} : random_pose(rng, 0.3);
    s.twist = twist;
    const TrackRun tr = simulate_track(s, 10, 0.1, static_cast<std::uint64_t>(run));
    for (std::size_t i = 0; i < tr.frames.size(); ++i) {
      const TrackFrame& f = tr.frames[i];
      if (!f.error.empty() || !f.twist_estimate) {
        o.require(false, "frame failed: " + f.error);
        continue;
      }
      worst_twist = std::max({worst_twist, (f.twist_estimate->angular - twist.angular).cwiseAbs().maxCoeff(),
                              (f.twist_estimate->linear - twist.linear).cwiseAbs().maxCoeff()});
      Rng frame_rng(1);
      const MeasurementSet m = simulate_measurements(s.anchors, tr.truth[i], NoiseModel{},
                                                     MeasurementTypes{true, false, true}, frame_rng);
      const TwistEstimate at_truth = estimate_twist(s.anchors, s.conformation, tr.truth[i].pose, m.range_rates, m.mask);
      worst_residual = std::max(worst_residual, at_truth.residual_rms);
    }
  }
  o.require(worst_twist < 1e-7, "twist error " + fmt(worst_twist));
  o.require(worst_residual < 1e-10, "residual at true pose " + fmt(worst_residual));
  if (o.pass) o.detail = "20 trajectories x 10 frames, twist error " + fmt(worst_twist) + ", residual " + fmt(worst_residual) + " m/s";
  return o;
}

Outcome comparability() {
  Outcome o;
  const auto rows = run_benchmark(presets::fig4_scenario(), presets::fig4_experiment());
  std::ostringstream detail;
  double worst_ratio = 0.0;
  for (const std::string est : {"mds", "nls", "gabp"}) {
    std::vector<ResultRow> curve;
    std::copy_if(rows.begin(), rows.end(), std::back_inserter(curve), [&](const ResultRow& r) { return r.estimator == est; });
    o.require(curve.size() == 6, "grid size");
    for (std::size_t i = 1; i < curve.size(); ++i) {
      o.require(curve[i].rmse_translation_m >= curve[i - 1].rmse_translation_m &&
                    curve[i].rmse_rotation_deg >= curve[i - 1].rmse_rotation_deg,
                est + " not monotone at sigma " + fmt(curve[i].sigma));
    }
  }
  for (std::size_t i = 0; i + 2 < rows.size(); i += 3) {
    const ResultRow& nls = rows[i + 1];
    const ResultRow& gabp = rows[i + 2];
    for (double ratio : {gabp.rmse_translation_m / nls.rmse_translation_m, gabp.rmse_rotation_deg / nls.rmse_rotation_deg}) {
      worst_ratio = std::max({worst_ratio, ratio, 1.0 / ratio});
      o.require(ratio <= 2.0 && ratio >= 0.5, "gabp/nls ratio " + fmt(ratio) + " at sigma " + fmt(nls.sigma));
    }
  }
  if (o.pass) o.detail = "monotone over 6 points x 1000 trials, worst gabp/nls ratio " + fmt(worst_ratio);
  return o;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Outcome determinism() {
  Outcome o;
  const auto dir = std::filesystem::temp_directory_path() / "rbl_acceptance_determinism";
  std::filesystem::create_directories(dir);
  std::string outputs[2];
  for (int i = 0; i < 2; ++i) {
    const auto file = dir / ("run" + std::to_string(i) + ".csv");
    const std::string cmd = std::string("\"") + RBL_CLI_PATH + "\" benchmark --preset fig4 --seed 7 > \"" + file.string() + "\"";
    o.require(std::system(cmd.c_str()) == 0, "CLI exited with an error");
    outputs[i] = read_file(file);
  }
  std::filesystem::remove_all(dir);
  o.require(!outputs[0].empty(), "empty CSV");
  o.require(outputs[0] == outputs[1], "CSV outputs differ");
  if (o.pass) o.detail = "two runs, " + std::to_string(outputs[0].size()) + " identical bytes";
  return o;
}

Outcome semantic() {
  Outcome o;
  Rng rng(10);
  double worst = 0.0;
  for (int i = 0; i < 100000; ++i) {
    SemanticHeading h;
    h.body_vector = random_vector(rng, 1.0).normalized();
    worst = std::max(worst, std::abs(semantic_transform(h, random_pose(rng, 10.0)).world_vector.norm() - 1.0));
  }
  o.require(worst <= 1e-12, "norm deviation " + fmt(worst));
  Mat3 quarter;
  quarter << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  SemanticHeading h;
  h.body_vector = Vec3::UnitX();
  o.require(semantic_transform(h, Pose{quarter, Vec3::Zero()}).world_vector == Vec3::UnitY(), "90 deg example not exact");
  const Vec3 via_exp = semantic_transform(h, Pose{so3_exp(Vec3(0, 0, std::numbers::pi / 2)), Vec3::Zero()}).world_vector;
  o.require((via_exp - Vec3::UnitY()).cwiseAbs().maxCoeff() <= 4 * std::numeric_limits<double>::epsilon(),
            "90 deg via axis-angle off by more than rounding");
  if (o.pass) o.detail = "norm deviation " + fmt(worst) + " over 1e5 poses, 90 deg example exact";
  return o;
}

struct Criterion {
  int id;
  const char* name;
  double limit_s;  // 0: no runtime limit
  std::function<Outcome()> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "noiseless exactness", 10.0, noiseless_exactness},
      {2, "kinematic consistency", 0.0, kinematic_consistency},
      {3, "CRLB validity", 120.0, crlb_validity},
      {4, "FIM correctness", 0.0, fim_correctness},
      {5, "completion", 0.0, completion},
      {6, "incomplete-observation benefit", 0.0, completion_benefit},
      {7, "tracking", 0.0, tracking},
      {8, "estimator comparability", 300.0, comparability},
      {9, "determinism", 0.0, determinism},
      {10, "semantic", 0.0, semantic},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.limit_s > 0.0 && secs >= c.limit_s) o.require(false, "runtime " + fmt(secs) + " s exceeds " + fmt(c.limit_s) + " s");
    failed += o.pass ? 0 : 1;
    std::printf("%s criterion %d (%s): %s [%.2f s]\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failed;
}
