#pragma once

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace calderon {

using Vec2 = Eigen::Vector2d;

struct Segment {
  Vec2 a = Vec2::Zero();
  Vec2 b = Vec2::Zero();

  double length() const { return (b - a).norm(); }
  Vec2 tangent() const { return (b - a) / length(); }
  Vec2 midpoint() const { return 0.5 * (a + b); }
};

double cross(const Vec2& u, const Vec2& v);
double signed_area(std::span<const Vec2> polygon);
double distance_to_segment(const Vec2& p, const Segment& s);

enum class PolygonSide { kInside, kBoundary, kOutside };
PolygonSide classify_point(const Vec2& p, std::span<const Vec2> polygon, double tol);

/// A straight piece of an interface (or of the measurement portion) that is
/// flat in the sense of the a-priori assumptions: one-sided cylinders of
/// half-width and height r0/3 centred at `center` fall in the two
/// neighbouring regions.
struct InterfacePortion {
  int index_k = 0;  // position along a chain; 0 when not attached to one
  Segment segment;
  Vec2 center = Vec2::Zero();
  int inside_domain = 0;
  int outside_domain = 0;  // 0 encodes the exterior of the domain
  Vec2 normal = Vec2::Zero();  // unit, points from inside_domain into outside_domain

  bool on_boundary() const { return outside_domain == 0; }
  InterfacePortion flipped() const;
};

/// Ordered subdomain ids j_1 = 1, ..., j_K together with the flat portions
/// Sigma_1 .. Sigma_K linking consecutive members.
struct Chain {
  std::vector<int> ids;
  std::vector<InterfacePortion> portions;

  int length() const { return static_cast<int>(ids.size()); }
};

/// Raw polygonal description of a partition. Polygons reference `vertices`
/// by index; subdomain k in the list becomes D_{k+1}.
struct PartitionSpec {
  std::vector<Vec2> vertices;
  std::vector<int> outer;
  std::vector<std::vector<int>> subdomains;
  // Outer edge i joins outer[i] and outer[(i + 1) % size].
  std::vector<int> sigma_edges;
  double r0 = 0.0;
  double lipschitz_L = 1.0;
  // Pairs of subdomain ids that must be linked by a flat portion of size r0.
  std::vector<std::pair<int, int>> declared_interfaces;
  // When false only the polygon-level checks run: the volume bound, the
  // Sigma_1 requirement and size checks on undeclared interfaces are skipped.
  bool enforce_apriori = true;
};

class DomainPartition {
 public:
  /// Validates `spec` and returns the partition. Throws GeometryError,
  /// OverlapError, CoverageError or FlatPortionError.
  static DomainPartition build(const PartitionSpec& spec);

  int num_subdomains() const { return static_cast<int>(subdomains_.size()); }
  const std::vector<Vec2>& outer() const { return outer_; }
  const std::vector<Vec2>& subdomain(int id) const { return subdomains_.at(id - 1); }
  const std::vector<Segment>& sigma() const { return sigma_; }
  const std::vector<InterfacePortion>& flat_portions() const { return portions_; }
  const PartitionSpec& spec() const { return spec_; }

  double r0() const { return spec_.r0; }
  double lipschitz_L() const { return spec_.lipschitz_L; }
  double area() const { return area_; }
  double subdomain_area(int id) const;
  double scale() const { return scale_; }
  double tolerance() const { return 1e-10 * scale_; }

  /// Lowest-index subdomain whose closure contains x.
  std::optional<int> locate(const Vec2& x) const;
  bool contains(const Vec2& x) const;
  bool on_sigma(const Vec2& x) const;
  bool on_boundary(const Vec2& x) const;

  /// Sigma_1: the flat portion of dD_1 inside Sigma. Throws FlatPortionError
  /// when the partition was built without one.
  const InterfacePortion& sigma_portion() const;

  /// Flat portion shared by the two subdomains, oriented so that `inside`
  /// is its inside_domain. nullopt when there is none.
  std::optional<InterfacePortion> portion_between(int outside, int inside) const;

  /// Subdomains linked to `id` by an interior flat portion, ascending.
  std::vector<int> neighbours(int id) const;

  /// Every distinct polygon edge (outer boundary and interfaces).
  std::vector<Segment> constraint_segments() const;

 private:
  PartitionSpec spec_;
  std::vector<Vec2> outer_;
  std::vector<std::vector<Vec2>> subdomains_;
  std::vector<Segment> sigma_;
  std::vector<Segment> edges_;
  std::vector<InterfacePortion> portions_;
  double area_ = 0.0;
  double scale_ = 1.0;
};

/// Shortest chain from D_1 to `target` over the flat-portion adjacency graph,
/// lexicographically smallest among the shortest ones.
Chain find_chain(const DomainPartition& partition, int target);

/// Equispaced points on the portion within r0/8 of its centre, each paired
/// with the portion normal.
std::vector<std::pair<Vec2, Vec2>> probe_points(const InterfacePortion& portion, double r0,
                                                int count);

/// `layers` horizontal strips of a width x depth rectangle whose top edge is
/// Sigma; D_1 is the top strip.
PartitionSpec layered_spec(int layers, double width, double depth, double r0,
                           double lipschitz_L = 1.0);

/// Omega_0 = Omega plus an exterior box D_0 glued on Sigma_1, D_0 taking the
/// id N + 1.
struct AugmentedDomain {
  DomainPartition partition;
  int d0_id = 0;
  Segment contact;         // D_0 meets Omega along this piece of Sigma
  Vec2 outward = Vec2::Zero();  // unit normal pointing from Omega into D_0
  double depth = 0.0;

  /// Distance from Omega of a point of D_0, measured along `outward`.
  double depth_of(const Vec2& x) const;
};

AugmentedDomain augment(const DomainPartition& partition);

}  // namespace calderon
