#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "rbl/error.hpp"
#include "rbl/geometry.hpp"
#include "rbl/harness/presets.hpp"
#include "rbl/measurement.hpp"
#include "rbl/random.hpp"
#include "rbl/table.hpp"

namespace rbl {

/// Uniform rotation (or uniform yaw about z) and a uniform translation box.
struct PoseDistribution {
  enum class Rotation { uniform, yaw, identity };
  Rotation rotation = Rotation::uniform;
  double yaw_min = -std::numbers::pi;
  double yaw_max = std::numbers::pi;
  Vec3 box_min = Vec3::Constant(-0.5);
  Vec3 box_max = Vec3::Constant(0.5);

  Pose sample(Rng& rng) const {
    Pose p;
    switch (rotation) {
      case Rotation::uniform: p.rotation = rng.rotation(); break;
      case Rotation::yaw: p.rotation = so3_exp(Vec3(0.0, 0.0, rng.uniform(yaw_min, yaw_max))); break;
      case Rotation::identity: p.rotation = Mat3::Identity(); break;
    }
    for (int i = 0; i < 3; ++i) p.translation(i) = rng.uniform(box_min(i), box_max(i));
    return p;
  }
};

enum class BlockageKind { none, bernoulli, hull };

struct ScenarioConfig {
  std::string name;
  Conformation conformation;
  AnchorSet anchors;
  bool relative = false;  // anchors are the nodes of a second (ego) body
  std::variant<Pose, PoseDistribution> pose;
  std::optional<Twist> twist;
  NoiseModel noise;
  BlockageKind blockage = BlockageKind::none;
  double blockage_p = 0.0;
  double hull_margin = 1e-6;
  MeasurementTypes types;

  Pose draw_pose(Rng& rng) const {
    if (const auto* fixed = std::get_if<Pose>(&pose)) return *fixed;
    return std::get<PoseDistribution>(pose).sample(rng);
  }
};

struct ExperimentConfig {
  std::vector<double> sigma_grid;
  int trials = 1;
  std::uint64_t seed = 0;
  std::vector<std::string> estimators{"mds", "nls", "gabp"};
  bool completion = true;
  std::string csv_path;
  std::string json_path;
  int threads = 0;  // 0: hardware concurrency
};

inline const std::vector<std::string>& known_estimators() {
  static const std::vector<std::string> tags{"mds", "mds-zero-impute", "nls", "gabp"};
  return tags;
}

inline std::vector<double> logspace(double lo_exp, double hi_exp, int count) {
  if (count < 1) throw Error(ErrorCode::config, "logspace needs at least one point");
  std::vector<double> out;
  for (int i = 0; i < count; ++i) {
    const double e = count == 1 ? lo_exp : lo_exp + (hi_exp - lo_exp) * i / (count - 1);
    out.push_back(std::pow(10.0, e));
  }
  return out;
}

namespace config {

using Json = nlohmann::json;

// Field access with dotted-path diagnostics.
class Reader {
 public:
  Reader(const Json& j, std::string path, std::filesystem::path base) : j_(j), path_(std::move(path)), base_(std::move(base)) {}

  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    throw Error(ErrorCode::config, where(key) + ": " + what);
  }

  std::string where(const std::string& key) const {
    if (key.empty()) return path_.empty() ? "document" : path_;
    return path_.empty() ? key : path_ + "." + key;
  }
  bool has(const std::string& key) const { return j_.contains(key); }
  const Json& raw(const std::string& key) const {
    if (!has(key)) fail(key, "missing");
    return j_.at(key);
  }
  Reader child(const std::string& key) const {
    const Json& v = raw(key);
    if (!v.is_object()) fail(key, "must be an object");
    return Reader(v, where(key), base_);
  }

  double number(const std::string& key) const {
    const Json& v = raw(key);
    if (!v.is_number()) fail(key, "must be a number");
    return v.get<double>();
  }
  double number(const std::string& key, double fallback) const { return has(key) ? number(key) : fallback; }

  bool boolean(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const Json& v = raw(key);
    if (!v.is_boolean()) fail(key, "must be true or false");
    return v.get<bool>();
  }

  std::string string(const std::string& key) const {
    const Json& v = raw(key);
    if (!v.is_string()) fail(key, "must be a string");
    return v.get<std::string>();
  }

  long long integer(const std::string& key) const {
    const Json& v = raw(key);
    if (!v.is_number_integer()) fail(key, "must be an integer");
    return v.get<long long>();
  }

  std::uint64_t unsigned_integer(const std::string& key) const {
    const Json& v = raw(key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
      fail(key, "must be a non-negative integer");
    }
    return v.get<std::uint64_t>();
  }

  Vec3 vec3(const std::string& key) const {
    const Json& v = raw(key);
    if (!v.is_array() || v.size() != 3) fail(key, "must be an array of three numbers");
    Vec3 out;
    for (int i = 0; i < 3; ++i) {
      if (!v[static_cast<std::size_t>(i)].is_number()) fail(key, "must be an array of three numbers");
      out(i) = v[static_cast<std::size_t>(i)].get<double>();
    }
    return out;
  }

  std::vector<double> numbers(const std::string& key) const {
    const Json& v = raw(key);
    if (!v.is_array()) fail(key, "must be an array of numbers");
    std::vector<double> out;
    for (const auto& x : v) {
      if (!x.is_number()) fail(key, "must be an array of numbers");
      out.push_back(x.get<double>());
    }
    return out;
  }

  std::filesystem::path resolve(const std::string& file) const {
    const std::filesystem::path p(file);
    return p.is_absolute() ? p : base_ / p;
  }

  const Json& json() const { return j_; }
  const std::filesystem::path& base() const { return base_; }

 private:
  const Json& j_;
  std::string path_;
  std::filesystem::path base_;
};

inline Points preset_points(const Reader& r, const std::string& name) {
  if (name == "cube") return presets::cube_body();
  if (name == "cube-anchors") return presets::cube_anchors();
  if (name == "truck") return presets::truck_body();
  if (name == "car") return presets::car_body();
  r.fail("preset", "unknown preset '" + name + "' (cube, cube-anchors, truck, car)");
}

// Exactly one of "file", "points", "preset".
inline Points point_source(const Reader& r) {
  const int given = int(r.has("file")) + int(r.has("points")) + int(r.has("preset"));
  if (given != 1) r.fail("", "exactly one of file, points, preset is required");
  if (r.has("preset")) return preset_points(r, r.string("preset"));
  if (r.has("file")) {
    const auto path = r.resolve(r.string("file"));
    if (!std::filesystem::exists(path)) r.fail("file", "'" + path.string() + "' does not exist");
    return load_points_table(path.string());
  }
  const Json& pts = r.raw("points");
  if (!pts.is_array() || pts.empty()) r.fail("points", "must be a nonempty array of [x, y, z]");
  Points p(static_cast<Eigen::Index>(pts.size()), 3);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const Json& row = pts[i];
    if (!row.is_array() || row.size() != 3) r.fail("points", "row " + std::to_string(i) + " must have three numbers");
    for (std::size_t c = 0; c < 3; ++c) {
      if (!row[c].is_number()) r.fail("points", "row " + std::to_string(i) + " must have three numbers");
      p(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = row[c].get<double>();
    }
  }
  return p;
}

template <class F>
auto wrap(const Reader& r, const std::string& key, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::config) throw;
    throw Error(ErrorCode::config, r.where(key) + ": " + e.message());
  }
}

inline Pose fixed_pose(const Reader& r) {
  Pose p;
  if (r.has("rotation") == r.has("axis_angle")) r.fail("", "give exactly one of rotation, axis_angle");
  if (r.has("rotation")) {
    const auto v = r.numbers("rotation");
    if (v.size() != 9) r.fail("rotation", "must hold 9 numbers, row-major");
    for (int i = 0; i < 9; ++i) p.rotation(i / 3, i % 3) = v[static_cast<std::size_t>(i)];
  } else {
    p.rotation = so3_exp(r.vec3("axis_angle"));
  }
  p.translation = r.vec3("translation");
  wrap(r, "rotation", [&] {
    validate_pose(p);
    return 0;
  });
  return p;
}

inline PoseDistribution pose_distribution(const Reader& r) {
  PoseDistribution d;
  const std::string rot = r.has("rotation") ? r.string("rotation") : "uniform";
  if (rot == "uniform") {
    d.rotation = PoseDistribution::Rotation::uniform;
  } else if (rot == "yaw") {
    d.rotation = PoseDistribution::Rotation::yaw;
    const auto range = r.numbers("yaw_range");
    if (range.size() != 2 || !(range[0] <= range[1])) r.fail("yaw_range", "must be [min, max] in radians");
    d.yaw_min = range[0];
    d.yaw_max = range[1];
  } else if (rot == "identity") {
    d.rotation = PoseDistribution::Rotation::identity;
  } else {
    r.fail("rotation", "must be uniform, yaw or identity");
  }
  const Reader box = r.child("translation_box");
  d.box_min = box.vec3("min");
  d.box_max = box.vec3("max");
  if (!(d.box_min.array() <= d.box_max.array()).all()) box.fail("min", "must not exceed max");
  return d;
}

}  // namespace config

inline ScenarioConfig parse_scenario(const nlohmann::json& j, const std::filesystem::path& base = ".") {
  using config::Reader;
  if (!j.is_object()) throw Error(ErrorCode::config, "scenario: document must be an object");
  const Reader r(j, "", base);
  ScenarioConfig s{"", Conformation(presets::cube_body()), AnchorSet(presets::cube_anchors()), false, Pose::identity(),
                   std::nullopt, NoiseModel{}, BlockageKind::none, 0.0, 1e-6, MeasurementTypes{}};
  s.name = r.has("name") ? r.string("name") : "scenario";

  const Reader cr = r.child("conformation");
  s.conformation = config::wrap(r, "conformation", [&] { return Conformation(config::point_source(cr)); });

  const Reader ar = r.child("anchors");
  s.relative = ar.boolean("relative", false);
  if (ar.has("body")) {
    if (ar.has("file") || ar.has("points") || ar.has("preset")) ar.fail("body", "give either body or a point source");
    const Reader br = ar.child("body");
    const Conformation ego = config::wrap(r, "anchors.body", [&] { return Conformation(config::point_source(br)); });
    s.anchors = AnchorSet(ego.nodes());
    s.relative = true;
  } else {
    s.anchors = config::wrap(r, "anchors", [&] { return AnchorSet(config::point_source(ar)); });
  }

  if (r.has("pose") == r.has("pose_distribution")) r.fail("pose", "give exactly one of pose, pose_distribution");
  if (r.has("pose")) {
    s.pose = config::fixed_pose(r.child("pose"));
  } else {
    s.pose = config::pose_distribution(r.child("pose_distribution"));
  }

  if (r.has("twist")) {
    const Reader tr = r.child("twist");
    s.twist = Twist{tr.vec3("angular"), tr.vec3("linear")};
  }

  if (r.has("noise")) {
    const Reader nr = r.child("noise");
    s.noise.range_sigma = nr.number("range_sigma", 0.0);
    s.noise.angle_sigma = nr.number("angle_sigma", 0.0);
    s.noise.range_rate_sigma = nr.number("range_rate_sigma", 0.0);
    config::wrap(r, "noise", [&] {
      s.noise.validate();
      return 0;
    });
  }

  if (r.has("blockage")) {
    const Reader br = r.child("blockage");
    const std::string kind = br.string("type");
    if (kind == "none") {
      s.blockage = BlockageKind::none;
    } else if (kind == "bernoulli") {
      s.blockage = BlockageKind::bernoulli;
      s.blockage_p = br.number("p");
      if (!(s.blockage_p >= 0.0 && s.blockage_p <= 1.0)) br.fail("p", "must lie in [0, 1]");
    } else if (kind == "hull") {
      s.blockage = BlockageKind::hull;
      s.hull_margin = br.number("margin", 1e-6);
      if (!(s.hull_margin >= 0.0)) br.fail("margin", "must be non-negative");
    } else {
      br.fail("type", "must be none, bernoulli or hull");
    }
  }

  if (r.has("measurements")) {
    const Reader mr = r.child("measurements");
    s.types.ranges = mr.boolean("ranges", true);
    s.types.aoa = mr.boolean("aoa", false);
    s.types.range_rates = mr.boolean("range_rates", false);
    if (!s.types.ranges) mr.fail("ranges", "range measurements are required by every estimator");
  }
  if (s.types.range_rates && !s.twist) r.fail("twist", "required when range_rates are enabled");
  return s;
}

inline ExperimentConfig parse_experiment(const nlohmann::json& j, const std::filesystem::path& base = ".") {
  using config::Reader;
  if (!j.is_object()) throw Error(ErrorCode::config, "experiment: document must be an object");
  const Reader r(j, "", base);
  ExperimentConfig e;
  const nlohmann::json& grid = r.raw("sigma_grid");
  if (grid.is_object()) {
    const Reader g = r.child("sigma_grid");
    const auto lo = g.number("log10_min");
    const auto hi = g.number("log10_max");
    const auto n = g.integer("count");
    if (n < 1) g.fail("count", "must be at least 1");
    e.sigma_grid = logspace(lo, hi, static_cast<int>(n));
  } else {
    e.sigma_grid = r.numbers("sigma_grid");
  }
  if (e.sigma_grid.empty()) r.fail("sigma_grid", "must not be empty");
  for (double s : e.sigma_grid) {
    if (!(s > 0.0) || !std::isfinite(s)) r.fail("sigma_grid", "entries must be positive");
  }
  const long long trials = r.integer("trials");
  if (trials < 1) r.fail("trials", "must be at least 1");
  e.trials = static_cast<int>(trials);
  e.seed = r.has("seed") ? r.unsigned_integer("seed") : 0;
  if (r.has("estimators")) {
    const nlohmann::json& list = r.raw("estimators");
    if (!list.is_array() || list.empty()) r.fail("estimators", "must be a nonempty array of names");
    e.estimators.clear();
    for (const auto& x : list) {
      if (!x.is_string()) r.fail("estimators", "must be a nonempty array of names");
      const std::string tag = x.get<std::string>();
      bool ok = false;
      for (const auto& k : known_estimators()) ok = ok || k == tag;
      if (!ok) r.fail("estimators", "unknown estimator '" + tag + "' (mds, mds-zero-impute, nls, gabp)");
      e.estimators.push_back(tag);
    }
  }
  e.completion = r.boolean("completion", true);
  if (r.has("output")) {
    const Reader o = r.child("output");
    if (o.has("csv")) e.csv_path = o.resolve(o.string("csv")).string();
    if (o.has("json")) e.json_path = o.resolve(o.string("json")).string();
  }
  if (r.has("threads")) {
    const long long t = r.integer("threads");
    if (t < 0) r.fail("threads", "must be non-negative");
    e.threads = static_cast<int>(t);
  }
  return e;
}

inline nlohmann::json load_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::config, path.string() + ": cannot open");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::config, path.string() + ": " + e.what());
  }
}

inline ScenarioConfig load_scenario(const std::filesystem::path& path) {
  try {
    return parse_scenario(load_json_file(path), path.parent_path().empty() ? "." : path.parent_path());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::config && e.message().rfind(path.string(), 0) != 0) {
      throw Error(ErrorCode::config, path.string() + ": " + e.message());
    }
    throw;
  }
}

inline ExperimentConfig load_experiment(const std::filesystem::path& path) {
  try {
    return parse_experiment(load_json_file(path), path.parent_path().empty() ? "." : path.parent_path());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::config && e.message().rfind(path.string(), 0) != 0) {
      throw Error(ErrorCode::config, path.string() + ": " + e.message());
    }
    throw;
  }
}

namespace presets {

inline ScenarioConfig fig4_scenario() {
  ScenarioConfig s{"fig4",
                   Conformation(cube_body()),
                   AnchorSet(cube_anchors()),
                   false,
                   PoseDistribution{},
                   std::nullopt,
                   NoiseModel{},
                   BlockageKind::none,
                   0.0,
                   1e-6,
                   MeasurementTypes{}};
  return s;
}

inline ExperimentConfig fig4_experiment() {
  ExperimentConfig e;
  e.sigma_grid = logspace(-3.0, 0.0, 6);
  e.trials = 1000;
  e.seed = 1;
  e.estimators = {"mds", "nls", "gabp"};
  return e;
}

// Truck as ego body, car as target in front of it, yaw-only relative pose.
inline ScenarioConfig fig5_scenario() {
  PoseDistribution d;
  d.rotation = PoseDistribution::Rotation::yaw;
  d.yaw_min = -0.35;
  d.yaw_max = 0.35;
  d.box_min = Vec3(10.0, -3.5, 0.0);
  d.box_max = Vec3(16.0, 3.5, 0.0);
  ScenarioConfig s{"fig5",      Conformation(car_body()), AnchorSet(truck_body()), true, d, std::nullopt, NoiseModel{},
                   BlockageKind::bernoulli, 0.2, 1e-6, MeasurementTypes{}};
  return s;
}

inline ExperimentConfig fig5_experiment() {
  ExperimentConfig e;
  e.sigma_grid = logspace(-2.0, 0.0, 5);
  e.trials = 500;
  e.seed = 1;
  e.estimators = {"mds", "mds-zero-impute", "nls"};
  return e;
}

}  // namespace presets

}  // namespace rbl
