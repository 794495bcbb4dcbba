#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "rbl/completion.hpp"
#include "rbl/error.hpp"
#include "rbl/geometry.hpp"
#include "rbl/measurement.hpp"
#include "rbl/procrustes.hpp"

// JSON documents. Matrices are flat row-major arrays with explicit shapes;
// masks are boolean arrays; value arrays list observed entries only, in the
// row-major order of the mask.

namespace rbl {

using Json = nlohmann::json;

namespace detail {

inline const Json& field(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw Error(ErrorCode::io, std::string("missing field '") + key + "'");
  return j.at(key);
}

inline double number(const Json& j, const char* what) {
  if (!j.is_number()) throw Error(ErrorCode::io, std::string("'") + what + "' must be a number");
  return j.get<double>();
}

inline Eigen::Index count(const Json& j, const char* key) {
  const Json& v = field(j, key);
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    throw Error(ErrorCode::io, std::string("'") + key + "' must be a non-negative integer");
  }
  return static_cast<Eigen::Index>(v.get<long long>());
}

inline std::vector<double> numbers(const Json& j, const char* key, std::size_t expected) {
  const Json& v = field(j, key);
  if (!v.is_array() || v.size() != expected) {
    throw Error(ErrorCode::io, std::string("'") + key + "' must be an array of " + std::to_string(expected) + " numbers");
  }
  std::vector<double> out;
  out.reserve(expected);
  for (const auto& x : v) out.push_back(number(x, key));
  return out;
}

inline Json mask_json(const Mask& m) {
  Json out = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) out.push_back(static_cast<bool>(m(r, c)));
  }
  return out;
}

inline Mask mask_from(const Json& j, const char* key, Eigen::Index rows, Eigen::Index cols) {
  const Json& v = field(j, key);
  if (!v.is_array() || v.size() != static_cast<std::size_t>(rows * cols)) {
    throw Error(ErrorCode::io, std::string("'") + key + "' must hold " + std::to_string(rows * cols) + " booleans");
  }
  Mask m(rows, cols);
  for (Eigen::Index i = 0; i < rows * cols; ++i) {
    const Json& b = v[static_cast<std::size_t>(i)];
    if (!b.is_boolean()) throw Error(ErrorCode::io, std::string("'") + key + "' entries must be booleans");
    m(i / cols, i % cols) = b.get<bool>();
  }
  return m;
}

inline Json observed_values(const Eigen::MatrixXd& values, const Mask& mask) {
  Json out = Json::array();
  for (Eigen::Index r = 0; r < mask.rows(); ++r) {
    for (Eigen::Index c = 0; c < mask.cols(); ++c) {
      if (mask(r, c)) out.push_back(values(r, c));
    }
  }
  return out;
}

inline Eigen::MatrixXd values_from(const Json& j, const char* key, const Mask& mask) {
  const auto flat = numbers(j, key, static_cast<std::size_t>(mask.count()));
  Eigen::MatrixXd out = Eigen::MatrixXd::Constant(mask.rows(), mask.cols(), kAbsent);
  std::size_t i = 0;
  for (Eigen::Index r = 0; r < mask.rows(); ++r) {
    for (Eigen::Index c = 0; c < mask.cols(); ++c) {
      if (mask(r, c)) out(r, c) = flat[i++];
    }
  }
  return out;
}

}  // namespace detail

inline Json to_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

inline Vec3 vec3_from_json(const Json& j, const char* key) {
  const auto v = detail::numbers(j, key, 3);
  return {v[0], v[1], v[2]};
}

inline Json to_json(const Points& p) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < p.rows(); ++i) out.push_back(Json::array({p(i, 0), p(i, 1), p(i, 2)}));
  return out;
}

inline Points points_from_json(const Json& j) {
  if (!j.is_array()) throw Error(ErrorCode::io, "point list must be an array of [x, y, z]");
  Points p(static_cast<Eigen::Index>(j.size()), 3);
  for (std::size_t i = 0; i < j.size(); ++i) {
    const Json& row = j[i];
    if (!row.is_array() || row.size() != 3) {
      throw Error(ErrorCode::io, "point " + std::to_string(i) + " must have three coordinates");
    }
    for (int c = 0; c < 3; ++c) p(static_cast<Eigen::Index>(i), c) = detail::number(row[static_cast<std::size_t>(c)], "point");
  }
  return p;
}

inline Json to_json(const Pose& p) {
  Json rot = Json::array();
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) rot.push_back(p.rotation(r, c));
  }
  return {{"rotation", rot}, {"axis_angle", to_json(Vec3(so3_log(p.rotation)))}, {"translation", to_json(p.translation)}};
}

/// Accepts either a row-major "rotation" or an "axis_angle" vector.
inline Pose pose_from_json(const Json& j) {
  Pose p;
  if (j.contains("rotation")) {
    const auto r = detail::numbers(j, "rotation", 9);
    for (int i = 0; i < 9; ++i) p.rotation(i / 3, i % 3) = r[static_cast<std::size_t>(i)];
  } else {
    p.rotation = so3_exp(vec3_from_json(j, "axis_angle"));
  }
  p.translation = vec3_from_json(j, "translation");
  validate_pose(p);
  return p;
}

inline Json to_json(const Twist& t) { return {{"angular", to_json(t.angular)}, {"linear", to_json(t.linear)}}; }

inline Json to_json(const MeasurementSet& m) {
  Json out{{"num_anchors", m.num_anchors()}, {"num_nodes", m.num_nodes()}, {"mask", detail::mask_json(m.mask)}};
  if (m.has_ranges()) out["ranges"] = detail::observed_values(m.ranges, m.mask);
  if (m.has_aoa()) {
    Json aoa = Json::array();
    for (Eigen::Index j = 0; j < m.mask.rows(); ++j) {
      for (Eigen::Index k = 0; k < m.mask.cols(); ++k) {
        if (m.mask(j, k)) aoa.push_back(Json::array({m.azimuth(j, k), m.elevation(j, k)}));
      }
    }
    out["aoa"] = aoa;
  }
  if (m.has_range_rates()) out["range_rates"] = detail::observed_values(m.range_rates, m.mask);
  return out;
}

inline MeasurementSet measurement_set_from_json(const Json& j) {
  MeasurementSet m;
  const Eigen::Index a = detail::count(j, "num_anchors");
  const Eigen::Index k = detail::count(j, "num_nodes");
  m.mask = detail::mask_from(j, "mask", a, k);
  if (j.contains("ranges")) m.ranges = detail::values_from(j, "ranges", m.mask);
  if (j.contains("range_rates")) m.range_rates = detail::values_from(j, "range_rates", m.mask);
  if (j.contains("aoa")) {
    const Json& aoa = j.at("aoa");
    if (!aoa.is_array() || aoa.size() != static_cast<std::size_t>(m.mask.count())) {
      throw Error(ErrorCode::io, "'aoa' must hold one [azimuth, elevation] pair per observed link");
    }
    m.azimuth = Eigen::MatrixXd::Constant(a, k, kAbsent);
    m.elevation = Eigen::MatrixXd::Constant(a, k, kAbsent);
    std::size_t i = 0;
    for (Eigen::Index r = 0; r < a; ++r) {
      for (Eigen::Index c = 0; c < k; ++c) {
        if (!m.mask(r, c)) continue;
        const Json& pair = aoa[i++];
        if (!pair.is_array() || pair.size() != 2) throw Error(ErrorCode::io, "'aoa' entries must be pairs");
        m.azimuth(r, c) = detail::number(pair[0], "aoa");
        m.elevation(r, c) = detail::number(pair[1], "aoa");
      }
    }
  }
  return m;
}

inline Json to_json(const Edm& e) {
  return {{"size", e.size()},
          {"num_anchors", e.num_anchors()},
          {"known", detail::mask_json(e.known())},
          {"squared", detail::observed_values(e.squared(), e.known())}};
}

inline Edm edm_from_json(const Json& j) {
  const Eigen::Index n = detail::count(j, "size");
  const Mask known = detail::mask_from(j, "known", n, n);
  return Edm(detail::values_from(j, "squared", known), known, detail::count(j, "num_anchors"));
}

inline Json to_json(const CompletionReport& r) {
  return {{"completed", to_json(r.completed)},   {"iterations", r.iterations},
          {"converged", r.converged},            {"initial_mismatch", r.initial_mismatch},
          {"final_mismatch", r.final_mismatch},  {"change_history", r.change_history}};
}

inline CompletionReport completion_report_from_json(const Json& j) {
  CompletionReport r{edm_from_json(detail::field(j, "completed")), 0, 0.0, 0.0, false, {}};
  r.iterations = static_cast<int>(detail::count(j, "iterations"));
  const Json& conv = detail::field(j, "converged");
  if (!conv.is_boolean()) throw Error(ErrorCode::io, "'converged' must be a boolean");
  r.converged = conv.get<bool>();
  r.initial_mismatch = detail::number(detail::field(j, "initial_mismatch"), "initial_mismatch");
  r.final_mismatch = detail::number(detail::field(j, "final_mismatch"), "final_mismatch");
  const Json& hist = detail::field(j, "change_history");
  if (!hist.is_array()) throw Error(ErrorCode::io, "'change_history' must be an array");
  for (const auto& x : hist) r.change_history.push_back(detail::number(x, "change_history"));
  return r;
}

inline Json to_json(const PoseEstimate& e) {
  Json out = to_json(e.pose);
  out["method"] = e.method;
  out["status"] = to_string(e.status);
  out["iterations"] = e.iterations;
  out["residual_rms"] = e.residual_rms;
  out["projection_distance"] = e.projection_distance;
  if (e.node_positions) out["node_positions"] = to_json(*e.node_positions);
  return out;
}

inline PoseEstimate pose_estimate_from_json(const Json& j) {
  PoseEstimate e;
  e.pose = pose_from_json(j);
  const Json& method = detail::field(j, "method");
  if (!method.is_string()) throw Error(ErrorCode::io, "'method' must be a string");
  e.method = method.get<std::string>();
  const Json& status_field = detail::field(j, "status");
  if (!status_field.is_string()) throw Error(ErrorCode::io, "'status' must be a string");
  const std::string status = status_field.get<std::string>();
  bool known_status = false;
  for (auto s : {EstimateStatus::converged, EstimateStatus::max_iterations, EstimateStatus::no_convergence,
                 EstimateStatus::diverged}) {
    if (status == to_string(s)) {
      e.status = s;
      known_status = true;
    }
  }
  if (!known_status) throw Error(ErrorCode::io, "unknown status '" + status + "'");
  e.iterations = static_cast<int>(detail::count(j, "iterations"));
  e.residual_rms = detail::number(detail::field(j, "residual_rms"), "residual_rms");
  e.projection_distance = detail::number(detail::field(j, "projection_distance"), "projection_distance");
  if (j.contains("node_positions")) e.node_positions = points_from_json(j.at("node_positions"));
  return e;
}

}  // namespace rbl
