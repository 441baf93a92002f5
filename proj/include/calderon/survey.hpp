#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "calderon/fem.hpp"
#include "calderon/geometry.hpp"
#include "calderon/mesh.hpp"

namespace calderon {

enum class ArrayKind { kSchlumberger, kDipoleDipole, kPolePole, kSquare };

const char* to_string(ArrayKind kind);
ArrayKind parse_array_kind(const std::string& name);

/// Placement of one four-electrode array along a straight piece of Sigma.
struct ArrayGeometry {
  ArrayKind kind = ArrayKind::kSquare;
  Vec2 center = Vec2::Zero();
  Vec2 direction = Vec2(1.0, 0.0);
  double spacing = 1.0;  // Wenner a, dipole length, pole separation, Schlumberger AB/2
  double inner = 0.0;    // Schlumberger MN/2; 0 picks spacing / 5
  int separation = 1;    // dipole-dipole n
  double remote = 0.0;   // pole-pole distance to B and N; 0 picks 20 spacing
  double current = 1.0;
};

/// Current electrodes A (+I) and B (-I), potential electrodes M and N.
struct ElectrodeArray {
  ArrayKind kind = ArrayKind::kSquare;
  Vec2 a = Vec2::Zero();
  Vec2 b = Vec2::Zero();
  Vec2 m = Vec2::Zero();
  Vec2 n = Vec2::Zero();
  double current = 1.0;
  double spacing = 0.0;
  Vec2 midpoint = Vec2::Zero();

  /// pi / ln(BM AN / (AM BN)): the 2D half-plane factor turning dV / I into
  /// the resistivity of a homogeneous ground.
  double geometric_factor() const;
};

ElectrodeArray make_array(const ArrayGeometry& geometry);

struct Sounding {
  double voltage = 0.0;              // V(M) - V(N)
  double apparent_resistivity = 0.0;  // NaN for zero current
};

/// Neumann solve with +I at A and -I at B lumped on single Sigma nodes.
/// Throws ElectrodeOffSigmaError when an electrode is not a Sigma node.
Sounding simulate_sounding(const FemSystem& system, const ElectrodeArray& array);

struct PseudoSectionRow {
  ArrayKind kind = ArrayKind::kSquare;
  double midpoint = 0.0;  // coordinate along the array direction
  double spacing = 0.0;
  double voltage = 0.0;
  double apparent_resistivity = 0.0;
};

/// Rows sorted by spacing, then midpoint.
std::vector<PseudoSectionRow> pseudo_section(const FemSystem& system,
                                             const std::vector<ArrayGeometry>& family);

/// Arrays of one kind centred at every `centers` value (along x on y = surface)
/// for every spacing.
std::vector<ArrayGeometry> array_family(ArrayKind kind, const std::vector<double>& centers,
                                        const std::vector<double>& spacings, double surface_y = 0.0);

/// Electrode positions of a family, deduplicated and sorted.
std::vector<Vec2> electrode_positions(const std::vector<ArrayGeometry>& family);

/// Rectangle [-half_width, half_width] x [-depth, 0] with horizontal layer
/// boundaries at the given depths; Sigma is the top edge, D_1 the top layer.
PartitionSpec layered_earth_spec(double half_width, double depth,
                                 const std::vector<double>& interface_depths);

/// Mesh of a survey partition refined around the electrodes:
/// size = max(h_min, grading * distance to the nearest electrode).
Mesh survey_mesh(const DomainPartition& partition, const std::vector<Vec2>& electrodes,
                 double h_min, double grading, double h_far, bool mirror = false);

/// Apparent resistivity of a two-layer ground (top thickness t) from the 2D
/// image series V(r) = -(I rho1 / pi) [ln r + 2 sum_m k^m ln sqrt(r^2 + (2 m t)^2)],
/// k = (rho2 - rho1) / (rho2 + rho1).
double layered_apparent_resistivity(const ElectrodeArray& array, double rho1, double rho2,
                                    double thickness, int terms = 20000);

void write_pseudo_section(std::ostream& out, const std::vector<PseudoSectionRow>& rows);

}  // namespace calderon
