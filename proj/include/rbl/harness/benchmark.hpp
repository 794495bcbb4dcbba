#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "rbl/bounds.hpp"
#include "rbl/completion.hpp"
#include "rbl/estimators.hpp"
#include "rbl/harness/scenario.hpp"
#include "rbl/serialization.hpp"
#include "rbl/tracking.hpp"

namespace rbl {

inline std::uint64_t trial_seed(std::uint64_t master, std::size_t sigma_index, std::size_t trial_index) {
  return derive_seed(master, sigma_index, trial_index);
}

struct TrialData {
  std::uint64_t seed = 0;
  double sigma = 0.0;
  Pose truth;
  MeasurementSet measurements;
  Eigen::Index newly_blocked = 0;
  std::vector<std::string> warnings;
  std::optional<CrlbReport> crlb;
};

/// One seeded draw: pose, measurements at range noise `sigma`, blockage, bound.
inline TrialData simulate_trial(const ScenarioConfig& s, double sigma, std::uint64_t seed) {
  TrialData t;
  t.seed = seed;
  t.sigma = sigma;
  Rng rng(seed);
  t.truth = s.draw_pose(rng);
  NoiseModel noise = s.noise;
  noise.range_sigma = sigma;
  const RigidBodyState state{s.conformation, t.truth, s.twist.value_or(Twist{})};
  t.measurements = simulate_measurements(s.anchors, state, noise, s.types, rng);
  if (s.blockage != BlockageKind::none) {
    BlockagePolicy policy = BernoulliBlockage{s.blockage_p};
    if (s.blockage == BlockageKind::hull) policy = HullOcclusion{apply_pose(s.conformation, t.truth), s.hull_margin};
    BlockageResult b = apply_blockage(t.measurements, policy, s.anchors, rng);
    t.measurements = std::move(b.measurements);
    t.newly_blocked = b.newly_blocked;
    t.warnings = std::move(b.warnings);
  }
  if (t.measurements.mask.any() && sigma > 0.0) {
    const CrlbReport r = fim_ranges(s.anchors, s.conformation, t.truth, t.measurements.mask, sigma);
    if (!r.singular) t.crlb = r;
  }
  return t;
}

struct EstimatorRun {
  std::optional<PoseEstimate> estimate;
  std::optional<CompletionReport> completion;
  std::string failure;  // empty on success
  double rotation_error_deg = std::numeric_limits<double>::quiet_NaN();
  double translation_error_m = std::numeric_limits<double>::quiet_NaN();
  bool ok() const { return failure.empty(); }
};

inline EstimatorRun run_estimator(const std::string& tag, const ScenarioConfig& s, const TrialData& t,
                                  bool completion = true) {
  EstimatorRun run;
  const auto missing = completion ? MissingEntryStrategy::complete : MissingEntryStrategy::zero_impute;
  try {
    if (tag == "mds" || tag == "mds-zero-impute") {
      MdsPipelineResult r = mds_from_ranges(t.measurements, s.anchors, s.conformation,
                                            tag == "mds" ? missing : MissingEntryStrategy::zero_impute);
      run.estimate = r.estimate;
      run.completion = std::move(r.completion);
    } else if (tag == "nls") {
      NlsOptions opt;
      opt.range_sigma = t.sigma;
      opt.use_aoa = s.types.aoa && t.measurements.has_aoa();
      opt.angle_sigma = s.noise.angle_sigma;
      if (!completion) opt.init = mds_from_ranges(t.measurements, s.anchors, s.conformation, missing).estimate.pose;
      run.estimate = estimate_pose_nls(t.measurements, s.anchors, s.conformation, opt);
    } else if (tag == "gabp") {
      GabpOptions opt;
      opt.range_sigma = t.sigma;
      run.estimate = estimate_pose_gabp(t.measurements, s.anchors, s.conformation, opt).estimate;
    } else {
      throw Error(ErrorCode::config, "unknown estimator '" + tag + "'");
    }
    if (run.estimate->status == EstimateStatus::diverged || run.estimate->status == EstimateStatus::no_convergence) {
      run.failure = std::string("estimator status ") + to_string(run.estimate->status);
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::config) throw;
    run.failure = e.what();
  }
  if (run.estimate) {
    run.rotation_error_deg = rotation_error_deg(run.estimate->pose.rotation, t.truth.rotation);
    run.translation_error_m = translation_error(run.estimate->pose, t.truth);
  }
  return run;
}

/// Sum by recursive halving: the result depends only on the input order.
inline double pairwise_sum(const double* v, std::size_t n) {
  if (n == 0) return 0.0;
  if (n == 1) return v[0];
  const std::size_t h = n / 2;
  return pairwise_sum(v, h) + pairwise_sum(v + h, n - h);
}

inline double pairwise_sum(const std::vector<double>& v) { return pairwise_sum(v.data(), v.size()); }

/// Runs fn(i) for i in [0, n) on up to `threads` workers (0: hardware concurrency).
template <class Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
  std::size_t workers = threads > 0 ? static_cast<std::size_t>(threads) : std::thread::hardware_concurrency();
  workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(n, 1));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::atomic<bool> failed{false};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      (void)w;
      for (std::size_t i = next++; i < n && !failed; i = next++) {
        try {
          fn(i);
        } catch (...) {
          if (!failed.exchange(true)) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

struct ResultRow {
  double sigma = 0.0;
  std::string estimator;
  double rmse_translation_m = 0.0;
  double rmse_rotation_deg = 0.0;
  double crlb_translation_m = 0.0;
  double crlb_rotation_deg = 0.0;
  int trials = 0;
  int failures = 0;
};

/// Every estimator sees the same draws (paired design). RMSE over successful
/// trials; CRLB columns are square roots of the mean bound over trials with a
/// nonsingular information matrix.
inline std::vector<ResultRow> run_benchmark(const ScenarioConfig& s, const ExperimentConfig& e) {
  if (e.sigma_grid.empty() || e.trials < 1) throw Error(ErrorCode::config, "experiment needs a grid and trials >= 1");
  const std::size_t ne = e.estimators.size();
  const auto nt = static_cast<std::size_t>(e.trials);
  std::vector<ResultRow> rows;
  for (std::size_t si = 0; si < e.sigma_grid.size(); ++si) {
    const double sigma = e.sigma_grid[si];
    const double nan = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> sq_t(nt * ne, nan);
    std::vector<double> sq_r(nt * ne, nan);
    std::vector<double> bound_t(nt, nan);
    std::vector<double> bound_r(nt, nan);
    parallel_for(nt, e.threads, [&](std::size_t ti) {
      const TrialData t = simulate_trial(s, sigma, trial_seed(e.seed, si, ti));
      if (t.crlb) {
        bound_t[ti] = t.crlb->translation_bound;
        bound_r[ti] = t.crlb->rotation_bound;
      }
      for (std::size_t ei = 0; ei < ne; ++ei) {
        const EstimatorRun run = run_estimator(e.estimators[ei], s, t, e.completion);
        if (!run.ok()) continue;
        sq_t[ti * ne + ei] = run.translation_error_m * run.translation_error_m;
        sq_r[ti * ne + ei] = run.rotation_error_deg * run.rotation_error_deg;
      }
    });

    auto finite_mean = [](const std::vector<double>& v) {
      std::vector<double> kept;
      for (double x : v) {
        if (std::isfinite(x)) kept.push_back(x);
      }
      return kept.empty() ? std::numeric_limits<double>::quiet_NaN()
                          : pairwise_sum(kept) / static_cast<double>(kept.size());
    };
    const double crlb_t = std::sqrt(finite_mean(bound_t));
    const double crlb_r = std::sqrt(finite_mean(bound_r)) * kRadToDeg;
    for (std::size_t ei = 0; ei < ne; ++ei) {
      std::vector<double> et;
      std::vector<double> er;
      for (std::size_t ti = 0; ti < nt; ++ti) {
        et.push_back(sq_t[ti * ne + ei]);
        er.push_back(sq_r[ti * ne + ei]);
      }
      ResultRow row;
      row.sigma = sigma;
      row.estimator = e.estimators[ei];
      row.rmse_translation_m = std::sqrt(finite_mean(et));
      row.rmse_rotation_deg = std::sqrt(finite_mean(er));
      row.crlb_translation_m = crlb_t;
      row.crlb_rotation_deg = crlb_r;
      row.trials = e.trials;
      row.failures = static_cast<int>(std::count_if(et.begin(), et.end(), [](double x) { return !std::isfinite(x); }));
      rows.push_back(row);
    }
  }
  return rows;
}

inline void write_benchmark_csv(std::ostream& os, const std::vector<ResultRow>& rows) {
  os << "sigma,estimator,rmse_translation_m,rmse_rotation_deg,crlb_translation_m,crlb_rotation_deg,trials,failures\n";
  for (const auto& r : rows) {
    os << format_number(r.sigma) << ',' << r.estimator << ',' << format_number(r.rmse_translation_m) << ','
       << format_number(r.rmse_rotation_deg) << ',' << format_number(r.crlb_translation_m) << ','
       << format_number(r.crlb_rotation_deg) << ',' << r.trials << ',' << r.failures << '\n';
  }
}

inline Json finite_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

inline Json benchmark_json(const std::vector<ResultRow>& rows) {
  Json out = Json::array();
  for (const auto& r : rows) {
    out.push_back({{"sigma", r.sigma},
                   {"estimator", r.estimator},
                   {"rmse_translation_m", finite_or_null(r.rmse_translation_m)},
                   {"rmse_rotation_deg", finite_or_null(r.rmse_rotation_deg)},
                   {"crlb_translation_m", finite_or_null(r.crlb_translation_m)},
                   {"crlb_rotation_deg", finite_or_null(r.crlb_rotation_deg)},
                   {"trials", r.trials},
                   {"failures", r.failures}});
  }
  return out;
}

/// Full record of one seeded trial for one estimator.
inline Json run_scenario_once(const ScenarioConfig& s, double sigma, std::uint64_t seed, const std::string& estimator,
                              bool completion = true) {
  const TrialData t = simulate_trial(s, sigma, seed);
  Json trace{{"scenario", s.name},
             {"sigma", sigma},
             {"seed", seed},
             {"estimator", estimator},
             {"truth", to_json(t.truth)},
             {"measurements", to_json(t.measurements)},
             {"newly_blocked", t.newly_blocked},
             {"warnings", t.warnings}};
  const Edm edm = assemble_edm(s.anchors, s.conformation, t.measurements);
  trace["edm"] = to_json(edm);
  const EstimatorRun run = run_estimator(estimator, s, t, completion);
  if (run.completion) {
    trace["completion"] = to_json(*run.completion);
  } else if (!edm.complete() && completion) {
    try {
      trace["completion"] = to_json(complete_edm(edm));
    } catch (const Error& e) {
      trace["completion"] = {{"error", e.what()}};
    }
  }
  if (run.estimate) trace["estimate"] = to_json(*run.estimate);
  trace["errors"] = {{"rotation_deg", finite_or_null(run.rotation_error_deg)},
                     {"translation_m", finite_or_null(run.translation_error_m)}};
  if (t.crlb) {
    trace["crlb"] = {{"translation_m2", t.crlb->translation_bound},
                     {"rotation_rad2", t.crlb->rotation_bound},
                     {"condition_number", t.crlb->condition_number}};
  }
  trace["failure"] = run.failure.empty() ? Json(nullptr) : Json(run.failure);
  return trace;
}

/// Bound sweep at the scenario's fixed pose, or at one pose drawn with `seed`,
/// with every link observed.
inline std::vector<CrlbRow> crlb_for_scenario(const ScenarioConfig& s, const std::vector<double>& sigma_grid,
                                              std::uint64_t seed) {
  Rng rng(seed);
  const Pose pose = s.draw_pose(rng);
  return crlb_sweep({s.anchors, s.conformation, pose, Mask::Constant(s.anchors.size(), s.conformation.size(), true)},
                    sigma_grid);
}

struct TrackRun {
  std::vector<RigidBodyState> truth;
  std::vector<TrackFrame> frames;
};

/// Constant-twist trajectory from the scenario's pose draw, observed every `dt`.
inline TrackRun simulate_track(const ScenarioConfig& s, int frames, double dt, std::uint64_t seed,
                               const TrackConfig& config = {}) {
  if (frames < 1 || !(dt > 0.0)) throw Error(ErrorCode::config, "track needs frames >= 1 and dt > 0");
  if (!s.twist) throw Error(ErrorCode::config, "track scenario needs a twist");
  Rng rng(seed);
  TrackRun out;
  out.truth.push_back(RigidBodyState{s.conformation, s.draw_pose(rng), *s.twist});
  for (int i = 1; i < frames; ++i) out.truth.push_back(propagate_state(out.truth.back(), dt));
  MeasurementTypes types = s.types;
  types.range_rates = true;
  std::vector<TrackInput> inputs;
  for (int i = 0; i < frames; ++i) {
    Rng frame_rng(derive_seed(seed, 1, static_cast<std::uint64_t>(i)));
    inputs.push_back({i * dt, simulate_measurements(s.anchors, out.truth[static_cast<std::size_t>(i)], s.noise, types,
                                                    frame_rng)});
  }
  TrackConfig cfg = config;
  if (s.noise.range_sigma > 0.0) cfg.nls.range_sigma = s.noise.range_sigma;
  if (s.noise.range_rate_sigma > 0.0) cfg.range_rate_sigma = s.noise.range_rate_sigma;
  out.frames = track_sequence(s.anchors, s.conformation, inputs, cfg);
  return out;
}

inline void write_track_csv(std::ostream& os, const std::vector<TrackFrame>& frames,
                            const std::vector<RigidBodyState>* truth = nullptr) {
  os << "t,rotation_error_deg,translation_error_m,angular_error_rad_s,linear_error_m_s,pose_residual_rms,"
        "twist_residual_rms,error\n";
  const std::string nan = "nan";
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const TrackFrame& f = frames[i];
    const RigidBodyState* tr = truth && i < truth->size() ? &(*truth)[i] : nullptr;
    os << format_number(f.timestamp) << ',';
    if (f.pose_estimate && tr) {
      os << format_number(rotation_error_deg(f.pose_estimate->pose.rotation, tr->pose.rotation)) << ','
         << format_number(translation_error(f.pose_estimate->pose, tr->pose)) << ',';
    } else {
      os << nan << ',' << nan << ',';
    }
    if (f.twist_estimate && tr && tr->twist) {
      os << format_number((f.twist_estimate->angular - tr->twist->angular).norm()) << ','
         << format_number((f.twist_estimate->linear - tr->twist->linear).norm()) << ',';
    } else {
      os << nan << ',' << nan << ',';
    }
    os << (f.pose_estimate ? format_number(f.pose_estimate->residual_rms) : nan) << ','
       << (f.twist_estimate ? format_number(f.twist_residual_rms) : nan) << ',';
    std::string err = f.error;
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    os << err << '\n';
  }
}

}  // namespace rbl
