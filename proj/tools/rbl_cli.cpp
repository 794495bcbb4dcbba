#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "rbl/harness/benchmark.hpp"

namespace fs = std::filesystem;
using namespace rbl;

namespace {

struct Common {
  std::string scenario;
  std::string experiment;
  std::string preset;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string format = "csv";
};

void add_common(CLI::App* app, Common& c, bool with_experiment) {
  app->add_option("--scenario", c.scenario, "scenario config (JSON)");
  if (with_experiment) app->add_option("--experiment", c.experiment, "experiment config (JSON)");
  app->add_option("--preset", c.preset, "builtin scenario")->check(CLI::IsMember({"fig4", "fig5"}));
  app->add_option("--seed", c.seed, "master seed (u64)");
  app->add_option("--out", c.out, "output directory (default: stdout)");
  app->add_option("--format", c.format, "output format")->check(CLI::IsMember({"csv", "json"}));
}

ScenarioConfig scenario_of(const Common& c) {
  if (!c.preset.empty() && !c.scenario.empty()) throw Error(ErrorCode::config, "give either --preset or --scenario");
  if (c.preset == "fig4") return presets::fig4_scenario();
  if (c.preset == "fig5") return presets::fig5_scenario();
  if (c.scenario.empty()) throw Error(ErrorCode::config, "a scenario is required: --scenario <file> or --preset fig4|fig5");
  return load_scenario(c.scenario);
}

ExperimentConfig experiment_of(const Common& c) {
  ExperimentConfig e;
  if (!c.experiment.empty()) {
    e = load_experiment(c.experiment);
  } else if (c.preset == "fig4") {
    e = presets::fig4_experiment();
  } else if (c.preset == "fig5") {
    e = presets::fig5_experiment();
  } else {
    throw Error(ErrorCode::config, "an experiment is required: --experiment <file> or --preset fig4|fig5");
  }
  if (c.seed) e.seed = *c.seed;
  return e;
}

// Writes to <out>/<name> when --out is given, else to `fallback` if nonempty, else stdout.
void emit(const Common& c, const std::string& name, const std::string& text, const std::string& fallback = "") {
  fs::path path;
  if (!c.out.empty()) {
    std::error_code ec;
    fs::create_directories(c.out, ec);
    if (ec) throw Error(ErrorCode::io, "cannot create " + c.out + ": " + ec.message());
    path = fs::path(c.out) / name;
  } else if (!fallback.empty()) {
    path = fallback;
  }
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::io, "cannot write " + path.string());
  f << text;
  std::cerr << "wrote " << path.string() << '\n';
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

Json read_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorCode::io, "cannot open " + path);
  try {
    return Json::parse(f);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::io, path + ": " + e.what());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rigid body localization from wireless ranges: simulation, estimation and bounds"};
  app.require_subcommand(1);

  Common c;
  double sigma = -1.0;
  std::string estimator = "nls";
  std::string measurements_path;
  std::string edm_path;
  int trials = 0;
  int threads = -1;
  int frames = 10;
  double dt = 0.1;
  int max_iters = 500;

  auto* simulate = app.add_subcommand("simulate", "draw one trial and print its measurements");
  add_common(simulate, c, false);
  simulate->add_option("--sigma", sigma, "range noise (m); defaults to the scenario's");

  auto* estimate = app.add_subcommand("estimate", "estimate a pose from measurements or from one simulated trial");
  add_common(estimate, c, false);
  estimate->add_option("--sigma", sigma, "range noise (m); defaults to the scenario's");
  estimate->add_option("--estimator", estimator)->check(CLI::IsMember(known_estimators()));
  estimate->add_option("--measurements", measurements_path, "MeasurementSet JSON; prints only the estimate");

  auto* benchmark = app.add_subcommand("benchmark", "Monte Carlo RMSE sweep against the CRLB");
  add_common(benchmark, c, true);
  benchmark->add_option("--trials", trials, "override trials per grid point")->check(CLI::PositiveNumber);
  benchmark->add_option("--threads", threads, "worker threads (0: all cores)")->check(CLI::NonNegativeNumber);

  auto* crlb = app.add_subcommand("crlb", "CRLB sweep over the experiment's sigma grid");
  add_common(crlb, c, true);

  auto* track = app.add_subcommand("track", "constant-twist tracking run");
  add_common(track, c, false);
  track->add_option("--frames", frames)->check(CLI::PositiveNumber);
  track->add_option("--dt", dt, "frame interval (s)")->check(CLI::PositiveNumber);
  track->add_option("--estimator", estimator)->check(CLI::IsMember({"nls", "mds", "gabp"}));

  auto* complete = app.add_subcommand("complete", "EDM completion on a masked trial or an Edm JSON document");
  add_common(complete, c, false);
  complete->add_option("--edm", edm_path, "Edm JSON with unknown entries");
  complete->add_option("--max-iters", max_iters)->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  const bool json = c.format == "json";
  try {
    if (simulate->parsed()) {
      const ScenarioConfig s = scenario_of(c);
      const double sg = sigma >= 0.0 ? sigma : s.noise.range_sigma;
      const TrialData t = simulate_trial(s, sg, c.seed.value_or(0));
      Json doc{{"scenario", s.name}, {"sigma", sg}, {"seed", t.seed}, {"truth", to_json(t.truth)},
               {"measurements", to_json(t.measurements)}, {"edm", to_json(assemble_edm(s.anchors, s.conformation, t.measurements))},
               {"warnings", t.warnings}};
      emit(c, "simulate.json", dump(doc));
    } else if (estimate->parsed()) {
      const ScenarioConfig s = scenario_of(c);
      const double sg = sigma >= 0.0 ? sigma : s.noise.range_sigma;
      if (!measurements_path.empty()) {
        TrialData t;
        t.sigma = sg;
        t.measurements = measurement_set_from_json(read_json(measurements_path));
        const EstimatorRun run = run_estimator(estimator, s, t);
        if (!run.estimate) throw Error(ErrorCode::invalid_argument, run.failure);
        emit(c, "estimate.json", dump(to_json(*run.estimate)));
      } else {
        emit(c, "trace.json", dump(run_scenario_once(s, sg, c.seed.value_or(0), estimator)));
      }
    } else if (benchmark->parsed()) {
      const ScenarioConfig s = scenario_of(c);
      ExperimentConfig e = experiment_of(c);
      if (trials > 0) e.trials = trials;
      if (threads >= 0) e.threads = threads;
      const auto rows = run_benchmark(s, e);
      if (json) {
        emit(c, "benchmark.json", dump(benchmark_json(rows)), e.json_path);
      } else {
        std::ostringstream os;
        write_benchmark_csv(os, rows);
        emit(c, "benchmark.csv", os.str(), e.csv_path);
      }
    } else if (crlb->parsed()) {
      const ScenarioConfig s = scenario_of(c);
      const ExperimentConfig e = experiment_of(c);
      const auto rows = crlb_for_scenario(s, e.sigma_grid, e.seed);
      if (json) {
        Json out = Json::array();
        for (const auto& r : rows) {
          out.push_back({{"sigma", r.sigma},
                         {"crlb_translation_m2", r.translation_bound},
                         {"crlb_rotation_rad2", r.rotation_bound},
                         {"condition_number", r.condition_number}});
        }
        emit(c, "crlb.json", dump(out));
      } else {
        std::ostringstream os;
        write_crlb_csv(os, rows);
        emit(c, "crlb.csv", os.str());
      }
    } else if (track->parsed()) {
      const ScenarioConfig s = scenario_of(c);
      TrackConfig cfg;
      cfg.estimator = estimator == "mds" ? TrackEstimator::mds : estimator == "gabp" ? TrackEstimator::gabp : TrackEstimator::nls;
      const TrackRun run = simulate_track(s, frames, dt, c.seed.value_or(0), cfg);
      if (json) {
        Json out = Json::array();
        for (std::size_t i = 0; i < run.frames.size(); ++i) {
          const TrackFrame& f = run.frames[i];
          Json fr{{"t", f.timestamp}, {"truth", to_json(run.truth[i].pose)}};
          if (f.pose_estimate) fr["pose"] = to_json(*f.pose_estimate);
          if (f.twist_estimate) fr["twist"] = to_json(*f.twist_estimate);
          fr["twist_residual_rms"] = f.twist_residual_rms;
          fr["error"] = f.error.empty() ? Json(nullptr) : Json(f.error);
          out.push_back(fr);
        }
        emit(c, "track.json", dump(out));
      } else {
        std::ostringstream os;
        write_track_csv(os, run.frames, &run.truth);
        emit(c, "track.csv", os.str());
      }
    } else if (complete->parsed()) {
      CompletionOptions opt;
      opt.max_iters = max_iters;
      Edm edm = [&] {
        if (!edm_path.empty()) return edm_from_json(read_json(edm_path));
        const ScenarioConfig s = scenario_of(c);
        const TrialData t = simulate_trial(s, s.noise.range_sigma, c.seed.value_or(0));
        return assemble_edm(s.anchors, s.conformation, t.measurements);
      }();
      emit(c, "completion.json", dump(to_json(complete_edm(edm, opt))));
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.code() == ErrorCode::config ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
