#include "calderon/survey.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numbers>
#include <ostream>

#include "calderon/errors.hpp"

namespace calderon {

const char* to_string(ArrayKind kind) {
  switch (kind) {
    case ArrayKind::kSchlumberger: return "schlumberger";
    case ArrayKind::kDipoleDipole: return "dipole-dipole";
    case ArrayKind::kPolePole: return "pole-pole";
    case ArrayKind::kSquare: return "square";
  }
  return "unknown";
}

ArrayKind parse_array_kind(const std::string& name) {
  if (name == "schlumberger") return ArrayKind::kSchlumberger;
  if (name == "dipole-dipole") return ArrayKind::kDipoleDipole;
  if (name == "pole-pole") return ArrayKind::kPolePole;
  if (name == "square" || name == "wenner") return ArrayKind::kSquare;
  throw ConfigError("unknown array kind '" + name + "'");
}

double ElectrodeArray::geometric_factor() const {
  const double am = (m - a).norm(), bm = (m - b).norm();
  const double an = (n - a).norm(), bn = (n - b).norm();
  return std::numbers::pi / std::log((bm * an) / (am * bn));
}

ElectrodeArray make_array(const ArrayGeometry& g) {
  if (!(g.spacing > 0.0)) throw PreconditionError("electrode spacing must be positive");
  const Vec2 d = g.direction.normalized();
  auto at = [&](double s) -> Vec2 { return g.center + s * d; };
  ElectrodeArray e;
  e.kind = g.kind;
  e.current = g.current;
  e.spacing = g.spacing;
  const double a = g.spacing;
  switch (g.kind) {
    case ArrayKind::kSquare:  // A M N B, equispaced
      e.a = at(-1.5 * a);
      e.m = at(-0.5 * a);
      e.n = at(0.5 * a);
      e.b = at(1.5 * a);
      break;
    case ArrayKind::kSchlumberger: {
      const double inner = g.inner > 0.0 ? g.inner : a / 5.0;
      if (!(inner < a)) throw PreconditionError("Schlumberger MN/2 must be below AB/2");
      e.a = at(-a);
      e.m = at(-inner);
      e.n = at(inner);
      e.b = at(a);
      break;
    }
    case ArrayKind::kDipoleDipole: {  // B A ... M N
      if (g.separation < 1) throw PreconditionError("dipole separation must be >= 1");
      const double span = (g.separation + 2) * a;
      e.b = at(-0.5 * span);
      e.a = at(-0.5 * span + a);
      e.m = at(0.5 * span - a);
      e.n = at(0.5 * span);
      break;
    }
    case ArrayKind::kPolePole: {
      const double remote = g.remote > 0.0 ? g.remote : 20.0 * a;
      e.a = at(-0.5 * a);
      e.m = at(0.5 * a);
      e.b = at(-0.5 * a - remote);
      e.n = at(0.5 * a + remote);
      break;
    }
  }
  e.midpoint = g.center;
  if (!(e.geometric_factor() > 0.0)) throw PreconditionError("array has no positive geometric factor");
  return e;
}

namespace {

int sigma_node(const Mesh& mesh, const std::vector<int>& nodes, const Vec2& p) {
  double scale = 0.0;
  for (const Vec2& v : mesh.vertices) scale = std::max(scale, v.cwiseAbs().maxCoeff());
  const double tol = 1e-9 * std::max(1.0, scale);
  for (int v : nodes) {
    if ((mesh.vertices[v] - p).norm() <= tol) return v;
  }
  throw ElectrodeOffSigmaError("electrode at (" + std::to_string(p.x()) + ", " +
                               std::to_string(p.y()) + ") is not a Sigma node");
}

}  // namespace

Sounding simulate_sounding(const FemSystem& system, const ElectrodeArray& array) {
  const Mesh& mesh = system.mesh();
  const std::vector<int> nodes = sigma_path(mesh).nodes;
  const int ia = sigma_node(mesh, nodes, array.a);
  const int ib = sigma_node(mesh, nodes, array.b);
  const int im = sigma_node(mesh, nodes, array.m);
  const int in = sigma_node(mesh, nodes, array.n);
  Sounding s;
  if (array.current == 0.0) {
    s.apparent_resistivity = std::numeric_limits<double>::quiet_NaN();
    return s;
  }
  Field load = Field::Zero(system.num_dofs());
  load[ia] += array.current;
  load[ib] -= array.current;
  const Field u = system.solve_neumann_load(load);
  s.voltage = u[im] - u[in];
  s.apparent_resistivity = array.geometric_factor() * s.voltage / array.current;
  return s;
}

std::vector<PseudoSectionRow> pseudo_section(const FemSystem& system,
                                             const std::vector<ArrayGeometry>& family) {
  std::vector<PseudoSectionRow> rows;
  rows.reserve(family.size());
  for (const ArrayGeometry& g : family) {
    const ElectrodeArray array = make_array(g);
    const Sounding s = simulate_sounding(system, array);
    PseudoSectionRow row;
    row.kind = g.kind;
    row.midpoint = g.center.dot(g.direction.normalized());
    row.spacing = g.spacing;
    row.voltage = s.voltage;
    row.apparent_resistivity = s.apparent_resistivity;
    rows.push_back(row);
  }
  std::stable_sort(rows.begin(), rows.end(), [](const auto& x, const auto& y) {
    if (x.spacing != y.spacing) return x.spacing < y.spacing;
    return x.midpoint < y.midpoint;
  });
  return rows;
}

std::vector<ArrayGeometry> array_family(ArrayKind kind, const std::vector<double>& centers,
                                        const std::vector<double>& spacings, double surface_y) {
  std::vector<ArrayGeometry> out;
  for (double a : spacings) {
    for (double c : centers) {
      ArrayGeometry g;
      g.kind = kind;
      g.center = Vec2(c, surface_y);
      g.spacing = a;
      out.push_back(g);
    }
  }
  return out;
}

std::vector<Vec2> electrode_positions(const std::vector<ArrayGeometry>& family) {
  std::vector<Vec2> out;
  for (const ArrayGeometry& g : family) {
    const ElectrodeArray e = make_array(g);
    for (const Vec2& p : {e.a, e.b, e.m, e.n}) out.push_back(p);
  }
  std::sort(out.begin(), out.end(), [](const Vec2& x, const Vec2& y) {
    return x.x() != y.x() ? x.x() < y.x() : x.y() < y.y();
  });
  out.erase(std::unique(out.begin(), out.end(),
                        [](const Vec2& x, const Vec2& y) { return (x - y).norm() <= 1e-12; }),
            out.end());
  return out;
}

PartitionSpec layered_earth_spec(double half_width, double depth,
                                 const std::vector<double>& interface_depths) {
  if (!(half_width > 0.0) || !(depth > 0.0)) throw PreconditionError("box must be non-empty");
  std::vector<double> levels{0.0};
  for (double d : interface_depths) {
    if (!(d > levels.back()) || !(d < depth)) {
      throw PreconditionError("interface depths must increase inside the box");
    }
    levels.push_back(d);
  }
  levels.push_back(depth);
  const int layers = static_cast<int>(levels.size()) - 1;
  PartitionSpec spec;
  // Left column top to bottom (ids 0..layers), right column bottom to top.
  for (int i = 0; i <= layers; ++i) spec.vertices.emplace_back(-half_width, -levels[i]);
  for (int i = layers; i >= 0; --i) spec.vertices.emplace_back(half_width, -levels[i]);
  auto left = [](int i) { return i; };
  auto right = [layers](int i) { return 2 * layers + 1 - i; };
  spec.outer.push_back(left(0));
  for (int i = 1; i <= layers; ++i) spec.outer.push_back(left(i));
  for (int i = layers; i >= 0; --i) spec.outer.push_back(right(i));
  // Outer edge from right(0) back to left(0) is the ground surface.
  spec.sigma_edges = {static_cast<int>(spec.outer.size()) - 1};
  for (int k = 1; k <= layers; ++k) {
    spec.subdomains.push_back({left(k - 1), left(k), right(k), right(k - 1)});
  }
  spec.r0 = half_width;
  spec.enforce_apriori = false;
  return spec;
}

Mesh survey_mesh(const DomainPartition& partition, const std::vector<Vec2>& electrodes,
                 double h_min, double grading, double h_far, bool mirror) {
  if (!(h_min > 0.0) || !(grading > 0.0)) throw PreconditionError("mesh sizes must be positive");
  MeshOptions options;
  options.h_target = h_far;
  options.fixed_points = electrodes;
  options.size_field = [electrodes, h_min, grading](const Vec2& x) {
    double d = std::numeric_limits<double>::infinity();
    for (const Vec2& e : electrodes) d = std::min(d, (x - e).norm());
    return std::max(h_min, grading * d);
  };
  if (mirror) options.mirror_x = 0.0;
  return triangulate(partition, options);
}

double layered_apparent_resistivity(const ElectrodeArray& array, double rho1, double rho2,
                                    double thickness, int terms) {
  const double k = (rho2 - rho1) / (rho2 + rho1);
  auto potential = [&](const Vec2& source, const Vec2& x) {
    const double r = (x - source).norm();
    double v = std::log(r);
    double km = 1.0;
    for (int m = 1; m <= terms; ++m) {
      km *= k;
      if (std::abs(km) < 1e-18) break;
      const double z = 2.0 * m * thickness;
      v += km * std::log(r * r + z * z);  // 2 ln sqrt(.)
    }
    return -array.current * rho1 / std::numbers::pi * v;
  };
  const double dv = potential(array.a, array.m) - potential(array.b, array.m) -
                    potential(array.a, array.n) + potential(array.b, array.n);
  return array.geometric_factor() * dv / array.current;
}

void write_pseudo_section(std::ostream& out, const std::vector<PseudoSectionRow>& rows) {
  out << "kind\tmidpoint\tspacing\tvoltage\tapparent_resistivity\n" << std::setprecision(17);
  for (const auto& r : rows) {
    out << to_string(r.kind) << '\t' << r.midpoint << '\t' << r.spacing << '\t' << r.voltage << '\t'
        << r.apparent_resistivity << '\n';
  }
}

}  // namespace calderon
