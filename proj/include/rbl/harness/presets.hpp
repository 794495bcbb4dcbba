#pragma once

#include "rbl/geometry.hpp"

namespace rbl::presets {

/// Cube of the given side centred at the origin, nodes at the 8 corners.
inline Points cube_corners(double side) {
  Points p(8, 3);
  int i = 0;
  const double h = 0.5 * side;
  for (double x : {-h, h}) {
    for (double y : {-h, h}) {
      for (double z : {-h, h}) p.row(i++) << x, y, z;
    }
  }
  return p;
}

inline Points cube_body() { return cube_corners(1.0); }
inline Points cube_anchors() { return cube_corners(3.0); }

// Boxy stand-ins for the V2V scenario: x forward, y left, z up, origin on the
// ground below the body reference point. Mirrored in data/fig5_*.txt.

inline Points truck_body() {
  Points p(10, 3);
  p << 2.4, 1.2, 0.6,    //
       2.4, -1.2, 0.6,   //
       2.4, 1.2, 3.0,    //
       2.4, -1.2, 3.0,   //
       -3.0, 1.25, 3.8,  //
       -3.0, -1.25, 3.8, //
       -9.0, 1.25, 0.9,  //
       -9.0, -1.25, 0.9, //
       -9.0, 1.25, 3.8,  //
       -9.0, -1.25, 3.8;
  return p;
}

inline Points car_body() {
  Points p(8, 3);
  p << 2.2, 0.85, 0.5,   //
       2.2, -0.85, 0.5,  //
       -2.2, 0.85, 0.5,  //
       -2.2, -0.85, 0.5, //
       1.0, 0.75, 1.45,  //
       1.0, -0.75, 1.45, //
       -1.6, 0.75, 1.45, //
       -1.6, -0.75, 1.45;
  return p;
}

}  // namespace rbl::presets
