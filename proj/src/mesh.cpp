#include "calderon/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <numbers>
#include <ostream>
#include <set>

#include "calderon/errors.hpp"
#include "delaunay.hpp"

namespace calderon {

double Mesh::area(int t) const {
  const auto& tri = triangles[t];
  return 0.5 * cross(vertices[tri[1]] - vertices[tri[0]], vertices[tri[2]] - vertices[tri[0]]);
}

Vec2 Mesh::centroid(int t) const {
  const auto& tri = triangles[t];
  return (vertices[tri[0]] + vertices[tri[1]] + vertices[tri[2]]) / 3.0;
}

double Mesh::longest_edge(int t) const {
  const auto& tri = triangles[t];
  const Vec2& a = vertices[tri[0]];
  const Vec2& b = vertices[tri[1]];
  const Vec2& c = vertices[tri[2]];
  return std::max({(a - b).norm(), (b - c).norm(), (c - a).norm()});
}

double Mesh::min_angle_deg() const {
  double best = 180.0;
  for (const auto& tri : triangles) {
    for (int k = 0; k < 3; ++k) {
      const Vec2 u = vertices[tri[(k + 1) % 3]] - vertices[tri[k]];
      const Vec2 v = vertices[tri[(k + 2) % 3]] - vertices[tri[k]];
      best = std::min(best, std::atan2(std::abs(cross(u, v)), u.dot(v)) * 180.0 / std::numbers::pi);
    }
  }
  return best;
}

Eigen::Matrix<double, 3, 2> Mesh::basis_gradients(int t) const {
  const auto& tri = triangles[t];
  const double twice = 2.0 * area(t);
  Eigen::Matrix<double, 3, 2> g;
  for (int i = 0; i < 3; ++i) {
    const Vec2& pj = vertices[tri[(i + 1) % 3]];
    const Vec2& pk = vertices[tri[(i + 2) % 3]];
    g(i, 0) = (pj.y() - pk.y()) / twice;
    g(i, 1) = (pk.x() - pj.x()) / twice;
  }
  return g;
}

std::optional<Mesh::Location> Mesh::locate(const Vec2& p) const {
  for (int t = 0; t < num_triangles(); ++t) {
    const auto& tri = triangles[t];
    const double twice = 2.0 * area(t);
    Eigen::Vector3d bary;
    for (int i = 0; i < 3; ++i) {
      const Vec2& pj = vertices[tri[(i + 1) % 3]];
      const Vec2& pk = vertices[tri[(i + 2) % 3]];
      bary[i] = cross(pj - p, pk - p) / twice;
    }
    if (bary.minCoeff() >= -1e-12) return Location{t, bary};
  }
  return std::nullopt;
}

std::vector<int> Mesh::boundary_nodes() const {
  std::set<int> nodes;
  for (const auto& e : boundary_edges) {
    nodes.insert(e.a);
    nodes.insert(e.b);
  }
  return {nodes.begin(), nodes.end()};
}

void Mesh::update_h_max() {
  h_max = 0.0;
  for (int t = 0; t < num_triangles(); ++t) h_max = std::max(h_max, longest_edge(t));
}

namespace {

struct PlanarGraph {
  std::vector<Vec2> points;
  std::vector<std::array<int, 2>> segments;
  double tol = 0.0;

  int add_point(const Vec2& p) {
    for (std::size_t i = 0; i < points.size(); ++i) {
      if ((points[i] - p).norm() <= tol) return static_cast<int>(i);
    }
    points.push_back(p);
    return static_cast<int>(points.size() - 1);
  }

  void add_segment(const Vec2& a, const Vec2& b) {
    const int i = add_point(a);
    const int j = add_point(b);
    if (i == j) return;
    for (const auto& s : segments) {
      if ((s[0] == i && s[1] == j) || (s[0] == j && s[1] == i)) return;
    }
    segments.push_back({i, j});
  }

  // Splits segments at every point lying in their interior.
  void split_at_points() {
    std::vector<std::array<int, 2>> out;
    for (const auto& s : segments) {
      const Vec2 a = points[s[0]];
      const Vec2 d = points[s[1]] - a;
      std::vector<std::pair<double, int>> inner;
      for (std::size_t w = 0; w < points.size(); ++w) {
        if (static_cast<int>(w) == s[0] || static_cast<int>(w) == s[1]) continue;
        if (distance_to_segment(points[w], {a, points[s[1]]}) > tol) continue;
        const double t = (points[w] - a).dot(d) / d.squaredNorm();
        if (t > 0.0 && t < 1.0) inner.emplace_back(t, static_cast<int>(w));
      }
      std::sort(inner.begin(), inner.end());
      int prev = s[0];
      for (const auto& [t, w] : inner) {
        out.push_back({prev, w});
        prev = w;
      }
      out.push_back({prev, s[1]});
    }
    segments = std::move(out);
  }
};

}  // namespace

Mesh triangulate(const DomainPartition& partition, double h_target) {
  MeshOptions options;
  options.h_target = h_target;
  return triangulate(partition, options);
}

Mesh triangulate(const DomainPartition& partition, const MeshOptions& options) {
  if (!(options.h_target > 0.0)) throw PreconditionError("h_target must be positive");
  if (options.h_target > partition.r0()) {
    throw MeshError("h_target exceeds r0: the mesh cannot resolve the flat portions");
  }
  const double tol = partition.tolerance();
  PlanarGraph graph;
  graph.tol = tol;

  const std::optional<double> x0 = options.mirror_x;
  for (const Segment& s : partition.constraint_segments()) {
    if (!x0) {
      graph.add_segment(s.a, s.b);
      continue;
    }
    Vec2 a = s.a;
    Vec2 b = s.b;
    if (std::abs(a.x() - *x0) <= tol) a.x() = *x0;
    if (std::abs(b.x() - *x0) <= tol) b.x() = *x0;
    if (a.x() > *x0 && b.x() > *x0) continue;
    if (a.x() > *x0 || b.x() > *x0) {
      if (a.x() > *x0) std::swap(a, b);
      const double t = (*x0 - a.x()) / (b.x() - a.x());
      b = a + t * (b - a);
      b.x() = *x0;
    }
    graph.add_segment(a, b);
  }
  if (x0) {
    std::vector<double> ys;
    for (const Vec2& p : graph.points) {
      if (p.x() == *x0) ys.push_back(p.y());
    }
    std::sort(ys.begin(), ys.end());
    for (std::size_t i = 0; i + 1 < ys.size(); ++i) {
      if (ys[i + 1] - ys[i] <= tol) continue;
      const Vec2 mid(*x0, 0.5 * (ys[i] + ys[i + 1]));
      if (classify_point(mid, partition.outer(), tol) == PolygonSide::kInside) {
        graph.add_segment({*x0, ys[i]}, {*x0, ys[i + 1]});
      }
    }
  }
  for (const Vec2& p : options.fixed_points) {
    if (!partition.contains(p)) throw MeshError("fixed mesh point outside the domain");
    if (x0 && p.x() > *x0 + tol) continue;
    graph.add_point(p);
  }
  graph.split_at_points();

  detail::RefinementInput input;
  input.points = graph.points;
  input.segments = graph.segments;
  input.min_angle_deg = options.min_angle_deg;
  input.max_vertices = options.max_vertices;
  input.inside = [&](const Vec2& p) {
    if (x0 && !(p.x() < *x0)) return false;
    return classify_point(p, partition.outer(), tol) == PolygonSide::kInside;
  };
  const double h = options.h_target;
  const auto field = options.size_field;
  input.size = [h, field](const Vec2& p) { return field ? std::min(h, field(p)) : h; };

  detail::RefinementOutput half = detail::refine_delaunay(input);

  Mesh mesh;
  mesh.vertices = half.vertices;
  mesh.triangles = half.triangles;
  if (x0) {
    std::vector<int> image(half.vertices.size());
    for (std::size_t v = 0; v < half.vertices.size(); ++v) {
      const Vec2& p = half.vertices[v];
      if (p.x() == *x0) {
        image[v] = static_cast<int>(v);
      } else {
        image[v] = mesh.num_vertices();
        mesh.vertices.emplace_back(2.0 * *x0 - p.x(), p.y());
      }
    }
    for (const auto& t : half.triangles) {
      mesh.triangles.push_back({image[t[0]], image[t[2]], image[t[1]]});
    }
  }
  mesh.triangle_subdomain.resize(mesh.triangles.size());
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto id = partition.locate(mesh.centroid(t));
    if (!id) throw MeshError("triangle centroid outside every subdomain");
    mesh.triangle_subdomain[t] = *id;
  }
  tag_boundary(mesh, partition);
  mesh.update_h_max();
  return mesh;
}

RefinedMesh refine_uniform(const Mesh& mesh) {
  RefinedMesh out;
  Mesh& fine = out.mesh;
  fine.vertices = mesh.vertices;
  for (int v = 0; v < mesh.num_vertices(); ++v) out.parents.push_back({v, v});
  std::map<std::pair<int, int>, int> mid;
  auto midpoint = [&](int a, int b) {
    const std::pair<int, int> key{std::min(a, b), std::max(a, b)};
    auto it = mid.find(key);
    if (it != mid.end()) return it->second;
    const int v = fine.num_vertices();
    fine.vertices.push_back(0.5 * (mesh.vertices[a] + mesh.vertices[b]));
    out.parents.push_back({key.first, key.second});
    mid.emplace(key, v);
    return v;
  };
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles[t];
    const int m01 = midpoint(tri[0], tri[1]);
    const int m12 = midpoint(tri[1], tri[2]);
    const int m20 = midpoint(tri[2], tri[0]);
    const int sub = mesh.triangle_subdomain[t];
    for (const std::array<int, 3>& child :
         {std::array<int, 3>{tri[0], m01, m20}, std::array<int, 3>{tri[1], m12, m01},
          std::array<int, 3>{tri[2], m20, m12}, std::array<int, 3>{m01, m12, m20}}) {
      fine.triangles.push_back(child);
      fine.triangle_subdomain.push_back(sub);
    }
  }
  for (const auto& e : mesh.boundary_edges) {
    const int m = midpoint(e.a, e.b);
    fine.boundary_edges.push_back({e.a, m, e.tag});
    fine.boundary_edges.push_back({m, e.b, e.tag});
  }
  fine.update_h_max();
  return out;
}

SubMesh extract_submesh(const Mesh& mesh, const std::vector<bool>& keep_triangle,
                        const DomainPartition& tags_from) {
  SubMesh out;
  out.vertex_map.assign(mesh.vertices.size(), -1);
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    if (!keep_triangle[t]) continue;
    std::array<int, 3> tri{};
    for (int k = 0; k < 3; ++k) {
      int& m = out.vertex_map[mesh.triangles[t][k]];
      if (m < 0) {
        m = out.mesh.num_vertices();
        out.mesh.vertices.push_back(mesh.vertices[mesh.triangles[t][k]]);
      }
      tri[k] = m;
    }
    out.mesh.triangles.push_back(tri);
    out.mesh.triangle_subdomain.push_back(mesh.triangle_subdomain[t]);
  }
  tag_boundary(out.mesh, tags_from);
  out.mesh.update_h_max();
  return out;
}

void tag_boundary(Mesh& mesh, const DomainPartition& partition) {
  std::map<std::pair<int, int>, std::pair<int, int>> edges;  // key -> (count, oriented a)
  for (const auto& tri : mesh.triangles) {
    for (int k = 0; k < 3; ++k) {
      const int a = tri[k];
      const int b = tri[(k + 1) % 3];
      auto& entry = edges[{std::min(a, b), std::max(a, b)}];
      ++entry.first;
      entry.second = a;
    }
  }
  mesh.boundary_edges.clear();
  for (const auto& [key, entry] : edges) {
    if (entry.first != 1) continue;
    const int a = entry.second;
    const int b = a == key.first ? key.second : key.first;
    const Vec2& pa = mesh.vertices[a];
    const Vec2& pb = mesh.vertices[b];
    const bool sigma = partition.on_sigma(pa) && partition.on_sigma(pb) &&
                       partition.on_sigma(0.5 * (pa + pb));
    mesh.boundary_edges.push_back({a, b, sigma ? BoundaryTag::kSigma : BoundaryTag::kOther});
  }
}

std::vector<int> SigmaPath::interior() const {
  if (closed || nodes.size() <= 2) return closed ? nodes : std::vector<int>{};
  return {nodes.begin() + 1, nodes.end() - 1};
}

SigmaPath sigma_path(const Mesh& mesh) {
  std::map<int, int> next;
  std::set<int> has_incoming;
  for (const auto& e : mesh.boundary_edges) {
    if (e.tag != BoundaryTag::kSigma) continue;
    if (next.contains(e.a)) throw GeometryError("Sigma is not a simple boundary path");
    next[e.a] = e.b;
    has_incoming.insert(e.b);
  }
  SigmaPath path;
  if (next.empty()) return path;
  int start = -1;
  for (const auto& [a, b] : next) {
    if (!has_incoming.contains(a)) {
      if (start >= 0) throw GeometryError("Sigma is not contiguous on the mesh");
      start = a;
    }
  }
  path.closed = start < 0;
  if (path.closed) start = next.begin()->first;
  int v = start;
  for (;;) {
    path.nodes.push_back(v);
    auto it = next.find(v);
    if (it == next.end()) break;
    v = it->second;
    if (v == start) break;
  }
  if (path.nodes.size() != next.size() + (path.closed ? 0 : 1)) {
    throw GeometryError("Sigma is not contiguous on the mesh");
  }
  return path;
}

void write_mesh(std::ostream& out, const Mesh& mesh) {
  out << std::setprecision(17);
  out << "# vertices " << mesh.num_vertices() << "\nid\tx\ty\n";
  for (int v = 0; v < mesh.num_vertices(); ++v) {
    out << v << '\t' << mesh.vertices[v].x() << '\t' << mesh.vertices[v].y() << '\n';
  }
  out << "# triangles " << mesh.num_triangles() << "\nid\tv0\tv1\tv2\tsubdomain\n";
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles[t];
    out << t << '\t' << tri[0] << '\t' << tri[1] << '\t' << tri[2] << '\t'
        << mesh.triangle_subdomain[t] << '\n';
  }
}

}  // namespace calderon
