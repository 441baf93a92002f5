#pragma once

#include <vector>

#include <Eigen/Core>

#include "calderon/fem.hpp"
#include "calderon/geometry.hpp"

namespace calderon {

template <int Dim>
using Point = Eigen::Matrix<double, Dim, 1>;

/// Fundamental solution of the Laplacian: 1 / ((n-2) w_n |x-y|^{n-2}) for
/// n = 3 and -log|x-y| / (2 pi) for n = 2.
template <int Dim>
double gamma_kernel(const Point<Dim>& x, const Point<Dim>& y);
template <int Dim>
Point<Dim> gamma_gradient_x(const Point<Dim>& x, const Point<Dim>& y);
/// Entry (i, j) is d^2 Gamma / dx_i dy_j.
template <int Dim>
Eigen::Matrix<double, Dim, Dim> gamma_mixed(const Point<Dim>& x, const Point<Dim>& y);

/// Runtime-dimension convenience wrapper.
double gamma_kernel(const Eigen::VectorXd& x, const Eigen::VectorXd& y, int dimension);

/// Fundamental solution of div((1 + (a_plus - 1) chi_{x_n > 0}) grad) by
/// the image method. Points on the interface x_n = 0 count as lying below.
template <int Dim>
class TwoPhaseKernel {
 public:
  explicit TwoPhaseKernel(double a_plus);

  double a_plus() const { return a_plus_; }

  double value(const Point<Dim>& x, const Point<Dim>& y) const;
  Point<Dim> gradient_x(const Point<Dim>& x, const Point<Dim>& y) const;
  Point<Dim> gradient_y(const Point<Dim>& x, const Point<Dim>& y) const;
  /// Entry (i, j) is d^2 H / dx_i dy_j.
  Eigen::Matrix<double, Dim, Dim> mixed(const Point<Dim>& x, const Point<Dim>& y) const;

 private:
  struct Weights {
    double direct;
    double image;
  };
  Weights weights(const Point<Dim>& x, const Point<Dim>& y) const;

  double a_plus_;
};

/// Discrete Green's function with zero Dirichlet data: K G = (phi_p(y))_p.
/// Throws SourceTooCloseError when y is within 2 h_max of the boundary.
Field fem_green(const FemSystem& system, const Vec2& y);
/// Derivative of the discrete Green's function with respect to the source
/// along e (dipole load).
Field fem_green_derivative(const FemSystem& system, const Vec2& y, const Vec2& e);

/// S_U(y, z) = int_U (gamma1 - gamma2) grad G_1(., y) . grad G_2(., z) with
/// both Green's functions computed on one mesh.
class SingularSolution {
 public:
  SingularSolution(const FemSystem& system1, const FemSystem& system2, std::vector<int> region,
                   const DomainPartition& partition);

  double value(const Vec2& y, const Vec2& z) const;
  /// d/dy.e d/dz.f by exact differentiation of the sources.
  double mixed(const Vec2& y, const Vec2& z, const Vec2& e, const Vec2& f) const;
  /// The same by central differences of the source positions.
  double mixed_fd(const Vec2& y, const Vec2& z, const Vec2& e, const Vec2& f, double step) const;

  /// G_1(., y)^T D G_2(., z) for given nodal fields.
  double pair(const Field& g1, const Field& g2) const;

  const SparseMatrix& difference_matrix() const { return difference_; }

 private:
  void check_probe(const Vec2& p) const;

  const FemSystem* system1_;
  const FemSystem* system2_;
  std::vector<int> region_;
  const DomainPartition* partition_;
  SparseMatrix difference_;
};

struct AsymptoticsConfig {
  double gamma_minus = 1.0;  // side containing the source y
  double gamma_plus = 2.0;   // side containing x
  Vec2 slope_minus = Vec2::Zero();  // affine perturbations, zero for two constants
  Vec2 slope_plus = Vec2::Zero();
  double r0 = 0.8;
  double width = 4.0;   // slab [-width/2, width/2] x [-depth/2, depth/2], interface y = 0
  double depth = 4.0;
  std::vector<double> radii;  // defaults to r0/16 * 2^-k, k = 0..4
  double angle = 0.3;         // x = Q + r (sin angle, cos angle) on the upper side
  double grading = 0.12;      // local size = grading * distance to Q
  double h_far = 0.25;
};

struct AsymptoticsReport {
  std::vector<double> radii;
  std::vector<double> distance;        // |x - y|
  std::vector<double> green;           // G(x, y), direct FEM
  std::vector<double> value_residual;  // |G - c Gamma - R(Q, Q)|
  std::vector<double> gradient_residual;
  std::vector<double> mixed_residual;
  double predicted_coefficient = 0.0;  // 2 / (gamma_minus + gamma_plus)
  double fitted_coefficient = 0.0;
  double value_exponent = 0.0;
  double gradient_exponent = 0.0;
  double mixed_exponent = 0.0;
  double regular_part = 0.0;  // R(Q, Q)
  int num_triangles = 0;
};

/// Least-squares slope of log(values) against log(radii).
double fit_exponent(const std::vector<double>& radii, const std::vector<double>& values);

AsymptoticsReport verify_asymptotics(const AsymptoticsConfig& config);

}  // namespace calderon
