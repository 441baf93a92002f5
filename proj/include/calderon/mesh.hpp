#pragma once

#include <array>
#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "calderon/geometry.hpp"

namespace calderon {

enum class BoundaryTag { kSigma, kOther };

struct BoundaryEdge {
  int a = 0;
  int b = 0;
  BoundaryTag tag = BoundaryTag::kOther;
};

/// Conforming P1 triangulation. Triangles are counter-clockwise; every
/// triangle lies in exactly one subdomain.
struct Mesh {
  std::vector<Vec2> vertices;
  std::vector<std::array<int, 3>> triangles;
  std::vector<int> triangle_subdomain;
  std::vector<BoundaryEdge> boundary_edges;
  double h_max = 0.0;

  int num_vertices() const { return static_cast<int>(vertices.size()); }
  int num_triangles() const { return static_cast<int>(triangles.size()); }

  double area(int t) const;
  Vec2 centroid(int t) const;
  double longest_edge(int t) const;
  double min_angle_deg() const;

  /// Rows are the (constant) gradients of the three hat functions of t.
  Eigen::Matrix<double, 3, 2> basis_gradients(int t) const;

  struct Location {
    int triangle = -1;
    Eigen::Vector3d barycentric = Eigen::Vector3d::Zero();
  };
  /// Containing triangle and barycentric coordinates (closed triangles,
  /// first match wins).
  std::optional<Location> locate(const Vec2& p) const;

  /// Nodes lying on at least one boundary edge, ascending.
  std::vector<int> boundary_nodes() const;

  void update_h_max();
};

struct MeshOptions {
  double h_target = 0.0;
  // Optional local target edge length; the effective target is
  // min(h_target, size_field(x)).
  std::function<double(const Vec2&)> size_field;
  std::vector<Vec2> fixed_points;
  // Mesh the half x <= mirror_x and reflect it: the result is exactly
  // symmetric under x -> 2 mirror_x - x.
  std::optional<double> mirror_x;
  double min_angle_deg = 20.0;
  std::size_t max_vertices = 2'000'000;
};

/// Quality conforming Delaunay refinement of the partition. Throws MeshError
/// when h_target exceeds r0.
Mesh triangulate(const DomainPartition& partition, double h_target);
Mesh triangulate(const DomainPartition& partition, const MeshOptions& options);

/// Red refinement: every triangle split into four through edge midpoints.
/// parents[v] holds the two coarse endpoints of the edge v was created on,
/// or (v, v) for inherited vertices.
struct RefinedMesh {
  Mesh mesh;
  std::vector<std::array<int, 2>> parents;
};
RefinedMesh refine_uniform(const Mesh& mesh);

/// Keeps the flagged triangles and renumbers vertices. `vertex_map[old]` is
/// the new index or -1.
struct SubMesh {
  Mesh mesh;
  std::vector<int> vertex_map;
};
SubMesh extract_submesh(const Mesh& mesh, const std::vector<bool>& keep_triangle,
                        const DomainPartition& tags_from);

/// Recomputes boundary edges and tags those on Sigma of `partition`.
void tag_boundary(Mesh& mesh, const DomainPartition& partition);

/// Sigma nodes in order along Sigma, endpoints included. For a closed Sigma
/// (the whole boundary) the first node is not repeated.
struct SigmaPath {
  std::vector<int> nodes;
  bool closed = false;

  /// Nodes carrying data supported in Sigma: the path without its endpoints.
  std::vector<int> interior() const;
};
SigmaPath sigma_path(const Mesh& mesh);

void write_mesh(std::ostream& out, const Mesh& mesh);

}  // namespace calderon
