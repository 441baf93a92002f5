#pragma once

#include <array>
#include <functional>
#include <vector>

#include "calderon/geometry.hpp"

namespace calderon::detail {

struct RefinementInput {
  std::vector<Vec2> points;
  std::vector<std::array<int, 2>> segments;  // indices into points
  std::function<bool(const Vec2&)> inside;   // region kept in the output
  std::function<double(const Vec2&)> size;   // target longest edge at a point
  double min_angle_deg = 20.0;
  std::size_t max_vertices = 2'000'000;
};

struct RefinementOutput {
  std::vector<Vec2> vertices;
  std::vector<std::array<int, 3>> triangles;  // counter-clockwise
};

/// Ruppert-style refinement on a conforming Delaunay triangulation: input
/// segments are split at midpoints until none is encroached, then bad
/// triangles receive their circumcentres.
RefinementOutput refine_delaunay(const RefinementInput& input);

}  // namespace calderon::detail
