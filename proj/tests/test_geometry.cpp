#include <doctest.h>

#include <algorithm>
#include <functional>
#include <random>

#include "calderon/errors.hpp"
#include "calderon/geometry.hpp"
#include "calderon/mesh.hpp"
#include "fixtures.hpp"

using namespace calderon;

TEST_CASE("two-layer partition has one boundary and one interior flat portion") {
  const auto p = DomainPartition::build(fixtures::two_layer());
  CHECK(p.num_subdomains() == 2);
  CHECK(p.flat_portions().size() == 2);
  const auto& s1 = p.sigma_portion();
  CHECK(s1.inside_domain == 1);
  CHECK(s1.on_boundary());
  CHECK(s1.normal.y() == doctest::Approx(1.0));
  const auto inner = p.portion_between(1, 2);
  REQUIRE(inner);
  CHECK(inner->normal.y() == doctest::Approx(1.0));
  CHECK(inner->center.y() == doctest::Approx(0.5));
  double sum = 0.0;
  for (int k = 1; k <= 2; ++k) sum += p.subdomain_area(k);
  CHECK(std::abs(sum - p.area()) <= 1e-12 * p.area());
}

TEST_CASE("single square is a valid one-subdomain partition") {
  const auto p = DomainPartition::build(fixtures::unit_square());
  CHECK(p.num_subdomains() == 1);
  CHECK(p.sigma_portion().inside_domain == 1);
}

TEST_CASE("corner contact is rejected") {
  PartitionSpec spec;
  spec.vertices = {{0, 0}, {1, 0}, {1, 1}, {2, 1}, {2, 2}, {1, 2}, {1, 1}, {0, 1}};
  spec.outer = {0, 1, 2, 3, 4, 5, 6, 7};
  spec.subdomains = {{0, 1, 2, 7}, {2, 3, 4, 5}};
  spec.sigma_edges = {0};
  spec.r0 = 2.0;
  bool rejected = false;
  try {
    DomainPartition::build(spec);
  } catch (const CoverageError&) {
    rejected = true;
  } catch (const FlatPortionError&) {
    rejected = true;
  }
  CHECK(rejected);
}

TEST_CASE("overlap and coverage errors") {
  auto spec = fixtures::two_layer();
  spec.subdomains[1] = {0, 1, 3, 4};
  CHECK_THROWS_AS(DomainPartition::build(spec), OverlapError);
  auto gap = fixtures::two_layer();
  gap.subdomains.pop_back();
  CHECK_THROWS_AS(DomainPartition::build(gap), CoverageError);
}

TEST_CASE("volume bound is enforced") {
  CHECK_THROWS_AS(DomainPartition::build(fixtures::unit_square(0.5)), GeometryError);
}

TEST_CASE("declared interface without flat portion") {
  auto spec = fixtures::two_layer();
  spec.vertices = {{0, 0}, {1, 0}, {1, 0.95}, {1, 1}, {0, 1}, {0, 0.95}};
  spec.enforce_apriori = false;
  spec.declared_interfaces = {{1, 2}};
  CHECK_THROWS_AS(DomainPartition::build(spec), FlatPortionError);
}

TEST_CASE("find_chain on layered stacks") {
  const auto two = DomainPartition::build(fixtures::two_layer());
  const Chain c2 = find_chain(two, 2);
  CHECK(c2.ids == std::vector<int>{1, 2});
  CHECK(c2.portions.size() == 2);

  const auto four = DomainPartition::build(layered_spec(4, 1.0, 1.0, 0.6));
  const Chain c4 = find_chain(four, 4);
  // Oracle: enumerate simple paths from 1 to 4 over the adjacency graph and
  // keep the shortest, lexicographically smallest.
  std::vector<std::vector<int>> paths;
  std::vector<int> path{1};
  std::function<void(int)> dfs = [&](int u) {
    if (u == 4) {
      paths.push_back(path);
      return;
    }
    for (int v : four.neighbours(u)) {
      if (std::find(path.begin(), path.end(), v) != path.end()) continue;
      path.push_back(v);
      dfs(v);
      path.pop_back();
    }
  };
  dfs(1);
  std::sort(paths.begin(), paths.end(), [](const auto& a, const auto& b) {
    return a.size() != b.size() ? a.size() < b.size() : a < b;
  });
  REQUIRE(!paths.empty());
  CHECK(c4.ids == paths.front());
  CHECK(c4.ids == std::vector<int>{1, 2, 3, 4});
  for (int k = 1; k < c4.length(); ++k) {
    CHECK(four.portion_between(c4.ids[k - 1], c4.ids[k]).has_value());
    CHECK(c4.portions[k].inside_domain == c4.ids[k]);
    CHECK(c4.portions[k].outside_domain == c4.ids[k - 1]);
  }
}

TEST_CASE("isolated subdomain gives NoChainError") {
  // D_2 touches D_1 only along a short sliver, so no flat portion links them.
  PartitionSpec spec;
  spec.vertices = {{0, 0}, {1, 0}, {1, 1}, {0, 1}, {0.9, 0}, {0.9, 0.05}, {1, 0.05}};
  spec.outer = {0, 4, 1, 6, 2, 3};
  spec.subdomains = {{0, 4, 5, 6, 2, 3}, {4, 1, 6, 5}};
  spec.sigma_edges = {4};
  spec.r0 = 0.75;
  const auto p = DomainPartition::build(spec);
  CHECK_THROWS_AS(find_chain(p, 2), NoChainError);
}

TEST_CASE("probe points") {
  InterfacePortion portion;
  portion.segment = {{-1, 0}, {1, 0}};
  portion.center = {0, 0};
  portion.normal = {0, 1};
  const auto one = probe_points(portion, 0.8, 1);
  REQUIRE(one.size() == 1);
  CHECK(one[0].first.norm() == 0.0);
  const auto three = probe_points(portion, 0.8, 3);
  REQUIRE(three.size() == 3);
  CHECK(three[0].first.x() == doctest::Approx(-0.1));
  CHECK(three[1].first.x() == doctest::Approx(0.0));
  CHECK(three[2].first.x() == doctest::Approx(0.1));
  CHECK_THROWS_AS(probe_points(portion, 0.8, 0), PreconditionError);
}

TEST_CASE("augmented domain glues D_0 outside Sigma_1") {
  const auto p = DomainPartition::build(fixtures::two_layer());
  const auto aug = augment(p);
  CHECK(aug.d0_id == 3);
  CHECK(aug.partition.num_subdomains() == 3);
  CHECK(aug.outward.y() == doctest::Approx(1.0));
  CHECK(aug.partition.subdomain_area(3) == doctest::Approx(aug.contact.length() * aug.depth));
  CHECK(aug.partition.locate({0.5, 1.2}) == 3);
  CHECK(aug.partition.area() == doctest::Approx(p.area() + aug.partition.subdomain_area(3)));
}

TEST_CASE("unit square mesh at h = 0.5") {
  const auto p = DomainPartition::build(fixtures::unit_square());
  const Mesh m = triangulate(p, 0.5);
  CHECK(m.num_triangles() >= 8);
  CHECK(m.min_angle_deg() >= 20.0);
  CHECK(m.h_max <= 0.75);
  double area = 0.0;
  for (int t = 0; t < m.num_triangles(); ++t) {
    CHECK(m.area(t) > 0.0);
    area += m.area(t);
  }
  CHECK(area == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("two-layer mesh respects the interface") {
  const auto p = DomainPartition::build(fixtures::two_layer());
  const Mesh m = triangulate(p, 0.1);
  CHECK(m.min_angle_deg() >= 20.0);
  CHECK(m.h_max <= 0.15);
  for (int t = 0; t < m.num_triangles(); ++t) {
    const auto& tri = m.triangles[t];
    const bool above = std::all_of(tri.begin(), tri.end(), [&](int v) { return m.vertices[v].y() >= 0.5 - 1e-12; });
    const bool below = std::all_of(tri.begin(), tri.end(), [&](int v) { return m.vertices[v].y() <= 0.5 + 1e-12; });
    CHECK((above || below));
    CHECK(m.triangle_subdomain[t] == (above ? 1 : 2));
  }
  const SigmaPath sp = sigma_path(m);
  CHECK(!sp.closed);
  for (int v : sp.nodes) CHECK(m.vertices[v].y() == 1.0);
}

TEST_CASE("coarse target is a MeshError") {
  auto spec = fixtures::unit_square(0.1);
  spec.enforce_apriori = false;
  const auto p = DomainPartition::build(spec);
  CHECK_THROWS_AS(triangulate(p, 10.0), MeshError);
}

TEST_CASE("halving h does not increase h_max") {
  const auto p = DomainPartition::build(fixtures::two_layer());
  double prev = 1e9;
  for (double h : {0.4, 0.2, 0.1, 0.05}) {
    const Mesh m = triangulate(p, h);
    CHECK(m.h_max <= prev);
    CHECK(m.h_max <= 1.5 * h);
    prev = m.h_max;
  }
}

TEST_CASE("mirror option gives an exactly symmetric mesh") {
  const auto p = DomainPartition::build(fixtures::two_layer());
  MeshOptions opt;
  opt.h_target = 0.1;
  opt.mirror_x = 0.5;
  const Mesh m = triangulate(p, opt);
  CHECK(m.min_angle_deg() >= 20.0);
  for (const Vec2& v : m.vertices) {
    const Vec2 r(1.0 - v.x(), v.y());
    const bool found = std::any_of(m.vertices.begin(), m.vertices.end(),
                                   [&](const Vec2& w) { return w == r; });
    CHECK(found);
  }
  double area = 0.0;
  for (int t = 0; t < m.num_triangles(); ++t) {
    CHECK(m.area(t) > 0.0);
    area += m.area(t);
  }
  CHECK(area == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("uniform refinement keeps conformity and parents") {
  const auto p = DomainPartition::build(fixtures::two_layer());
  const Mesh m = triangulate(p, 0.25);
  const RefinedMesh r = refine_uniform(m);
  CHECK(r.mesh.num_triangles() == 4 * m.num_triangles());
  CHECK(r.mesh.boundary_edges.size() == 2 * m.boundary_edges.size());
  for (int v = 0; v < r.mesh.num_vertices(); ++v) {
    const auto [a, b] = r.parents[v];
    CHECK((r.mesh.vertices[v] - 0.5 * (m.vertices[a] + m.vertices[b])).norm() < 1e-15);
  }
  Mesh retagged = r.mesh;
  tag_boundary(retagged, p);
  CHECK(retagged.boundary_edges.size() == r.mesh.boundary_edges.size());
}
