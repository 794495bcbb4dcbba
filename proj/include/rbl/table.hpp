#pragma once

#include <fstream>
#include <istream>
#include <sstream>
#include <string>
#include <vector>

#include "rbl/error.hpp"
#include "rbl/geometry.hpp"

namespace rbl {

// Plain-text point table: one point per line, three whitespace-separated
// decimals in meters. '#' starts a comment; blank lines are skipped.
inline Points parse_points_table(std::istream& in, const std::string& origin = "<stream>") {
  std::vector<Vec3> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::vector<double> values;
    std::string token;
    while (ls >> token) {
      try {
        std::size_t used = 0;
        values.push_back(std::stod(token, &used));
        if (used != token.size()) throw std::invalid_argument(token);
      } catch (const std::exception&) {
        throw Error(ErrorCode::io, origin + ":" + std::to_string(line_no) + ": not a number: '" + token + "'");
      }
    }
    if (values.empty()) continue;
    if (values.size() != 3) {
      throw Error(ErrorCode::io, origin + ":" + std::to_string(line_no) + ": expected 3 values, found " +
                                     std::to_string(values.size()));
    }
    rows.emplace_back(values[0], values[1], values[2]);
  }
  Points out(static_cast<Eigen::Index>(rows.size()), 3);
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  return out;
}

inline Points load_points_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path);
  return parse_points_table(in, path);
}

inline std::string format_points_table(const Points& points) {
  std::ostringstream os;
  os.precision(17);
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    os << points(i, 0) << ' ' << points(i, 1) << ' ' << points(i, 2) << '\n';
  }
  return os.str();
}

}  // namespace rbl
