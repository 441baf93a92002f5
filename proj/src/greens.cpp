#include "calderon/greens.hpp"

#include <cmath>
#include <algorithm>
#include <limits>
#include <numbers>

#include <Eigen/Dense>

#include "calderon/errors.hpp"
#include "calderon/mesh.hpp"

namespace calderon {

namespace {

constexpr double kPi = std::numbers::pi;

template <int Dim>
double checked_distance(const Point<Dim>& x, const Point<Dim>& y) {
  const double r = (x - y).norm();
  if (!(r > 0.0)) throw CoincidentPointsError("kernel evaluated at coincident points");
  return r;
}

template <int Dim>
Point<Dim> reflect(Point<Dim> y) {
  y[Dim - 1] = -y[Dim - 1];
  return y;
}

}  // namespace

template <int Dim>
double gamma_kernel(const Point<Dim>& x, const Point<Dim>& y) {
  const double r = checked_distance<Dim>(x, y);
  if constexpr (Dim == 2) {
    return -std::log(r) / (2.0 * kPi);
  } else {
    return 1.0 / (4.0 * kPi * r);
  }
}

template <int Dim>
Point<Dim> gamma_gradient_x(const Point<Dim>& x, const Point<Dim>& y) {
  const double r = checked_distance<Dim>(x, y);
  const Point<Dim> d = x - y;
  if constexpr (Dim == 2) {
    return -d / (2.0 * kPi * r * r);
  } else {
    return -d / (4.0 * kPi * r * r * r);
  }
}

template <int Dim>
Eigen::Matrix<double, Dim, Dim> gamma_mixed(const Point<Dim>& x, const Point<Dim>& y) {
  const double r = checked_distance<Dim>(x, y);
  const Point<Dim> d = x - y;
  const auto id = Eigen::Matrix<double, Dim, Dim>::Identity();
  if constexpr (Dim == 2) {
    return (id / (r * r) - 2.0 * d * d.transpose() / std::pow(r, 4)) / (2.0 * kPi);
  } else {
    return (id / std::pow(r, 3) - 3.0 * d * d.transpose() / std::pow(r, 5)) / (4.0 * kPi);
  }
}

template double gamma_kernel<2>(const Point<2>&, const Point<2>&);
template double gamma_kernel<3>(const Point<3>&, const Point<3>&);
template Point<2> gamma_gradient_x<2>(const Point<2>&, const Point<2>&);
template Point<3> gamma_gradient_x<3>(const Point<3>&, const Point<3>&);
template Eigen::Matrix<double, 2, 2> gamma_mixed<2>(const Point<2>&, const Point<2>&);
template Eigen::Matrix<double, 3, 3> gamma_mixed<3>(const Point<3>&, const Point<3>&);

double gamma_kernel(const Eigen::VectorXd& x, const Eigen::VectorXd& y, int dimension) {
  if (x.size() != dimension || y.size() != dimension) {
    throw PreconditionError("point dimension does not match the kernel dimension");
  }
  if (dimension == 2) return gamma_kernel<2>(Point<2>(x), Point<2>(y));
  if (dimension == 3) return gamma_kernel<3>(Point<3>(x), Point<3>(y));
  throw PreconditionError("kernel dimension must be 2 or 3");
}

template <int Dim>
TwoPhaseKernel<Dim>::TwoPhaseKernel(double a_plus) : a_plus_(a_plus) {
  if (!(a_plus > 0.0)) throw PreconditionError("a_plus must be positive");
}

template <int Dim>
typename TwoPhaseKernel<Dim>::Weights TwoPhaseKernel<Dim>::weights(const Point<Dim>& x,
                                                                   const Point<Dim>& y) const {
  const double a = a_plus_;
  const bool x_up = x[Dim - 1] > 0.0;
  const bool y_up = y[Dim - 1] > 0.0;
  if (x_up && y_up) return {1.0 / a, (a - 1.0) / (a * (a + 1.0))};
  if (x_up != y_up) return {2.0 / (a + 1.0), 0.0};
  return {1.0, (1.0 - a) / (a + 1.0)};
}

template <int Dim>
double TwoPhaseKernel<Dim>::value(const Point<Dim>& x, const Point<Dim>& y) const {
  const Weights w = weights(x, y);
  double v = w.direct * gamma_kernel<Dim>(x, y);
  if (w.image != 0.0) v += w.image * gamma_kernel<Dim>(x, reflect<Dim>(y));
  return v;
}

template <int Dim>
Point<Dim> TwoPhaseKernel<Dim>::gradient_x(const Point<Dim>& x, const Point<Dim>& y) const {
  const Weights w = weights(x, y);
  Point<Dim> g = w.direct * gamma_gradient_x<Dim>(x, y);
  if (w.image != 0.0) g += w.image * gamma_gradient_x<Dim>(x, reflect<Dim>(y));
  return g;
}

template <int Dim>
Point<Dim> TwoPhaseKernel<Dim>::gradient_y(const Point<Dim>& x, const Point<Dim>& y) const {
  const Weights w = weights(x, y);
  Point<Dim> g = -w.direct * gamma_gradient_x<Dim>(x, y);
  if (w.image != 0.0) g += -w.image * reflect<Dim>(gamma_gradient_x<Dim>(x, reflect<Dim>(y)));
  return g;
}

template <int Dim>
Eigen::Matrix<double, Dim, Dim> TwoPhaseKernel<Dim>::mixed(const Point<Dim>& x,
                                                           const Point<Dim>& y) const {
  const Weights w = weights(x, y);
  Eigen::Matrix<double, Dim, Dim> m = w.direct * gamma_mixed<Dim>(x, y);
  if (w.image != 0.0) {
    Eigen::Matrix<double, Dim, Dim> im = gamma_mixed<Dim>(x, reflect<Dim>(y));
    im.col(Dim - 1) *= -1.0;
    m += w.image * im;
  }
  return m;
}

template class TwoPhaseKernel<2>;
template class TwoPhaseKernel<3>;

namespace {

void check_source(const FemSystem& system, const Vec2& y) {
  const Mesh& mesh = system.mesh();
  const auto loc = mesh.locate(y);
  if (!loc) throw SourceTooCloseError("source point outside the mesh");
  const double h = mesh.longest_edge(loc->triangle);
  double dist = std::numeric_limits<double>::infinity();
  for (const auto& e : mesh.boundary_edges) {
    dist = std::min(dist, distance_to_segment(y, {mesh.vertices[e.a], mesh.vertices[e.b]}));
  }
  if (dist < 2.0 * h) {
    throw SourceTooCloseError("source point within 2h of the boundary");
  }
}

}  // namespace

Field fem_green(const FemSystem& system, const Vec2& y) {
  check_source(system, y);
  return system.solve_with_load(point_load(system.mesh(), y));
}

Field fem_green_derivative(const FemSystem& system, const Vec2& y, const Vec2& e) {
  check_source(system, y);
  return system.solve_with_load(dipole_load(system.mesh(), y, e));
}

SingularSolution::SingularSolution(const FemSystem& system1, const FemSystem& system2,
                                   std::vector<int> region, const DomainPartition& partition)
    : system1_(&system1), system2_(&system2), region_(std::move(region)), partition_(&partition) {
  const Mesh& mesh = system1.mesh();
  if (system2.mesh().num_triangles() != mesh.num_triangles() ||
      system2.mesh().num_vertices() != mesh.num_vertices()) {
    throw PreconditionError("singular solution needs both systems on one mesh");
  }
  std::vector<bool> keep(mesh.num_triangles(), false);
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    keep[t] = std::find(region_.begin(), region_.end(), mesh.triangle_subdomain[t]) != region_.end();
  }
  difference_ = assemble_stiffness(mesh, system1.gamma(), keep) -
                assemble_stiffness(mesh, system2.gamma(), keep);
}

void SingularSolution::check_probe(const Vec2& p) const {
  for (int id : region_) {
    if (classify_point(p, partition_->subdomain(id), partition_->tolerance()) !=
        PolygonSide::kOutside) {
      throw ProbeInsideUError("probe point lies in the closure of U");
    }
  }
}

double SingularSolution::pair(const Field& g1, const Field& g2) const {
  return g1.dot(difference_ * g2);
}

double SingularSolution::value(const Vec2& y, const Vec2& z) const {
  check_probe(y);
  check_probe(z);
  return pair(fem_green(*system1_, y), fem_green(*system2_, z));
}

double SingularSolution::mixed(const Vec2& y, const Vec2& z, const Vec2& e, const Vec2& f) const {
  check_probe(y);
  check_probe(z);
  return pair(fem_green_derivative(*system1_, y, e), fem_green_derivative(*system2_, z, f));
}

double SingularSolution::mixed_fd(const Vec2& y, const Vec2& z, const Vec2& e, const Vec2& f,
                                  double step) const {
  check_probe(y);
  check_probe(z);
  const Field g1p = fem_green(*system1_, y + step * e);
  const Field g1m = fem_green(*system1_, y - step * e);
  const Field g2p = fem_green(*system2_, z + step * f);
  const Field g2m = fem_green(*system2_, z - step * f);
  return (pair(g1p, g2p) - pair(g1p, g2m) - pair(g1m, g2p) + pair(g1m, g2m)) / (4.0 * step * step);
}

double fit_exponent(const std::vector<double>& radii, const std::vector<double>& values) {
  if (radii.size() != values.size() || radii.size() < 2) {
    throw FitError("exponent fit needs matching radii and values");
  }
  Eigen::MatrixXd a(radii.size(), 2);
  Eigen::VectorXd b(radii.size());
  for (std::size_t i = 0; i < radii.size(); ++i) {
    if (!(radii[i] > 0.0) || !(values[i] > 0.0)) {
      throw FitError("exponent fit needs positive radii and values");
    }
    a(i, 0) = std::log(radii[i]);
    a(i, 1) = 1.0;
    b[i] = std::log(values[i]);
  }
  return a.colPivHouseholderQr().solve(b)[0];
}

AsymptoticsReport verify_asymptotics(const AsymptoticsConfig& config) {
  std::vector<double> radii = config.radii;
  if (radii.empty()) {
    for (int k = 0; k < 5; ++k) radii.push_back(config.r0 / 16.0 * std::pow(0.5, k));
  }
  if (radii.size() < 4) throw FitError("asymptotics fit needs at least 4 radii");
  for (double r : radii) {
    if (!(r > 0.0 && r < config.r0 / 16.0 + 1e-15)) {
      throw PreconditionError("radii must lie in (0, r0/16]");
    }
  }
  const double w = 0.5 * config.width;
  const double d = 0.5 * config.depth;
  PartitionSpec spec;
  spec.vertices = {{-w, -d}, {w, -d}, {w, 0.0}, {w, d}, {-w, d}, {-w, 0.0}};
  spec.outer = {0, 1, 2, 3, 4, 5};
  spec.subdomains = {{0, 1, 2, 5}, {5, 2, 3, 4}};  // D_1 below (source side), D_2 above
  spec.sigma_edges = {0};
  spec.r0 = config.r0;
  spec.enforce_apriori = false;
  spec.declared_interfaces = {{1, 2}};
  const DomainPartition partition = DomainPartition::build(spec);

  const Vec2 q = Vec2::Zero();
  const Vec2 up(0.0, 1.0);
  const Vec2 dir(std::sin(config.angle), std::cos(config.angle));
  std::vector<Vec2> xs, ys;
  for (double r : radii) {
    xs.push_back(q + r * dir);
    ys.push_back(q - r * up);
  }
  const double r_min = *std::min_element(radii.begin(), radii.end());
  MeshOptions options;
  options.h_target = std::min(config.h_far, config.r0);
  const double grading = config.grading;
  const double h_min = grading * r_min / 2.0;
  options.size_field = [q, grading, h_min](const Vec2& x) {
    return std::max(h_min, grading * (x - q).norm());
  };
  options.fixed_points = {q};
  for (std::size_t i = 0; i < radii.size(); ++i) {
    options.fixed_points.push_back(xs[i]);
    options.fixed_points.push_back(ys[i]);
  }
  const Mesh mesh = triangulate(partition, options);

  const PiecewiseLinearConductivity gamma(
      {AffinePiece{config.gamma_minus, config.slope_minus},
       AffinePiece{config.gamma_plus, config.slope_plus}},
      std::max({config.gamma_minus, config.gamma_plus, 1.0 / config.gamma_minus,
                1.0 / config.gamma_plus}) * 2.0);
  const FemSystem system = FemSystem::assemble(mesh, gamma);

  AsymptoticsReport report;
  report.radii = radii;
  report.num_triangles = mesh.num_triangles();
  const double c = 2.0 / (config.gamma_minus + config.gamma_plus);
  report.predicted_coefficient = c;
  const bool two_constant = config.slope_minus.isZero() && config.slope_plus.isZero();

  // Split route: G = H / gamma_minus + R with R gamma-harmonic, R = -H / gamma_minus on dOmega.
  const TwoPhaseKernel<2> kernel(config.gamma_plus / config.gamma_minus);
  const auto& bnodes = system.boundary_nodes();
  auto remainder = [&](const Vec2& y, int derivative) {
    Field data = Field::Zero(system.num_dofs());
    for (int v : bnodes) {
      const Vec2& x = mesh.vertices[v];
      data[v] = derivative < 0 ? -kernel.value(x, y) / config.gamma_minus
                               : -kernel.gradient_y(x, y)[derivative] / config.gamma_minus;
    }
    return system.solve_dirichlet_full(data);
  };
  report.regular_part = field_value(mesh, remainder(q, -1), q);

  std::vector<double> gamma_values;
  for (std::size_t i = 0; i < radii.size(); ++i) {
    const Vec2& x = xs[i];
    const Vec2& y = ys[i];
    const auto loc = mesh.locate(x);
    const int t = loc->triangle;
    const double dist = (x - y).norm();
    report.distance.push_back(dist);
    const Field g = fem_green(system, y);
    const double gx = field_value(mesh, g, x);
    report.green.push_back(gx);
    gamma_values.push_back(gamma_kernel<2>(x, y));
    if (two_constant) {
      const Field r = remainder(y, -1);
      report.value_residual.push_back(std::abs(field_value(mesh, r, x) - report.regular_part));
      report.gradient_residual.push_back(field_gradient(mesh, r, t).norm());
      Eigen::Matrix2d m;
      for (int j = 0; j < 2; ++j) m.col(j) = field_gradient(mesh, remainder(y, j), t);
      report.mixed_residual.push_back(m.norm());
    } else {
      // Offset from the fit below; the split-route constant belongs to the two-constant kernel.
      report.value_residual.push_back(gx - c * gamma_values.back());
      report.gradient_residual.push_back(
          (field_gradient(mesh, g, t) - c * gamma_gradient_x<2>(x, y)).norm());
      Eigen::Matrix2d m;
      for (int j = 0; j < 2; ++j) {
        const Field gd = fem_green_derivative(system, y, Vec2::Unit(j));
        m.col(j) = field_gradient(mesh, gd, t);
      }
      report.mixed_residual.push_back((m - c * gamma_mixed<2>(x, y)).norm());
    }
  }

  // G = c Gamma + d + e |x - y|: the regular part and its first-order drift.
  Eigen::MatrixXd a(radii.size(), 3);
  Eigen::VectorXd b(radii.size());
  for (std::size_t i = 0; i < radii.size(); ++i) {
    a(i, 0) = gamma_values[i];
    a(i, 1) = 1.0;
    a(i, 2) = report.distance[i];
    b[i] = report.green[i];
  }
  const Eigen::VectorXd fit = a.colPivHouseholderQr().solve(b);
  report.fitted_coefficient = fit[0];
  if (!two_constant) {
    // G - c Gamma = d + e |x - y| with c at its predicted value; d is the regular part.
    const Eigen::VectorXd offset =
        a.rightCols(2).colPivHouseholderQr().solve(Eigen::VectorXd::Map(
            report.value_residual.data(), static_cast<Eigen::Index>(radii.size())));
    report.regular_part = offset[0];
    for (double& v : report.value_residual) v = std::abs(v - offset[0]);
  }
  report.value_exponent = fit_exponent(report.distance, report.value_residual);
  report.gradient_exponent = fit_exponent(report.distance, report.gradient_residual);
  report.mixed_exponent = fit_exponent(report.distance, report.mixed_residual);
  return report;
}

}  // namespace calderon
