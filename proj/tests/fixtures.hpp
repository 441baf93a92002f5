#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>

#include "calderon/geometry.hpp"

namespace fixtures {

using calderon::PartitionSpec;
using calderon::Vec2;

inline PartitionSpec unit_square(double r0 = 1.0) {
  PartitionSpec spec;
  spec.vertices = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  spec.outer = {0, 1, 2, 3};
  spec.subdomains = {{0, 1, 2, 3}};
  spec.sigma_edges = {2};
  spec.r0 = r0;
  return spec;
}

// Unit square cut at y = 1/2; D_1 on top, Sigma the top edge.
inline PartitionSpec two_layer(double r0 = 0.75) {
  PartitionSpec spec;
  spec.vertices = {{0, 0}, {1, 0}, {1, 0.5}, {1, 1}, {0, 1}, {0, 0.5}};
  spec.outer = {0, 1, 2, 3, 4, 5};
  spec.subdomains = {{5, 2, 3, 4}, {0, 1, 2, 5}};
  spec.sigma_edges = {3};
  spec.r0 = r0;
  return spec;
}

// Regular polygon approximating a disk; Sigma is the whole boundary.
inline PartitionSpec disk(double radius, int sides, double r0) {
  PartitionSpec spec;
  for (int k = 0; k < sides; ++k) {
    const double t = 2.0 * std::numbers::pi * k / sides;
    spec.vertices.emplace_back(radius * std::cos(t), radius * std::sin(t));
    spec.outer.push_back(k);
    spec.sigma_edges.push_back(k);
  }
  spec.subdomains = {spec.outer};
  spec.r0 = r0;
  spec.enforce_apriori = false;
  return spec;
}

}  // namespace fixtures

namespace fixtures {

inline calderon::PartitionSpec layered_spec_for_tests(int layers) {
  return calderon::layered_spec(layers, 1.0, 1.0, std::min(1.0, 2.4 / layers));
}

}  // namespace fixtures
