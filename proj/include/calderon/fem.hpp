#pragma once

#include <functional>
#include <memory>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "calderon/conductivity.hpp"
#include "calderon/mesh.hpp"

namespace calderon {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Field = Eigen::VectorXd;  // nodal values

enum class LinearSolver {
  kDirect,             // sparse Cholesky
  kConjugateGradient,  // diagonal preconditioner, relative residual tolerance
};

struct SolverOptions {
  LinearSolver kind = LinearSolver::kDirect;
  double tolerance = 1e-10;
};

/// Stiffness matrix of div(gamma grad u) on the triangles where `keep` is
/// true (all of them when `keep` is empty). Exact for affine gamma: the
/// integrand is affine times constant gradients, so the centroid rule is exact.
SparseMatrix assemble_stiffness(const Mesh& mesh, const PiecewiseLinearConductivity& gamma,
                                const std::vector<bool>& keep = {});

/// Element matrix of one triangle for gamma = 1.
Eigen::Matrix3d element_stiffness(const Mesh& mesh, int t);

class FemSystem {
 public:
  static FemSystem assemble(std::shared_ptr<const Mesh> mesh,
                            const PiecewiseLinearConductivity& gamma, SolverOptions options = {});
  static FemSystem assemble(const Mesh& mesh, const PiecewiseLinearConductivity& gamma,
                            SolverOptions options = {});

  const Mesh& mesh() const { return *mesh_; }
  std::shared_ptr<const Mesh> mesh_ptr() const { return mesh_; }
  const PiecewiseLinearConductivity& gamma() const { return gamma_; }
  const SparseMatrix& stiffness() const { return stiffness_; }
  const SolverOptions& options() const { return options_; }
  int num_dofs() const { return mesh_->num_vertices(); }

  /// Sigma nodes carrying data (endpoints excluded), in order along Sigma.
  const std::vector<int>& sigma_nodes() const { return sigma_nodes_; }
  const std::vector<int>& boundary_nodes() const { return boundary_nodes_; }
  const std::vector<int>& interior_nodes() const { return interior_nodes_; }

  /// Dirichlet data on sigma_nodes(), zero on the rest of the boundary.
  Field solve_dirichlet(const Eigen::VectorXd& g_sigma) const;
  /// Same for several data vectors at once (columns).
  Eigen::MatrixXd solve_dirichlet(const Eigen::MatrixXd& g_sigma) const;
  /// Test mode: every boundary node pinned to `g[node]`.
  Field solve_dirichlet_full(const Field& g) const;
  /// Zero Dirichlet data on all of the boundary with nodal load f.
  Field solve_with_load(const Field& f) const;
  Eigen::MatrixXd solve_with_load(const Eigen::MatrixXd& f) const;

  /// Neumann problem with a nodal load (sum must vanish); zero-mean solution.
  Field solve_neumann_load(const Field& load) const;
  /// Neumann problem with a boundary flux density given at every node (only
  /// boundary entries are read); its P1 interpolant is integrated exactly.
  Field solve_neumann(const Field& flux) const;
  Field boundary_load(const Field& flux) const;

  double energy(const Field& u, const Field& v) const { return u.dot(stiffness_ * v); }

  /// Integral of u over Omega.
  double integral(const Field& u) const;

 private:
  struct Factorizations;

  Eigen::MatrixXd solve_interior(const Eigen::MatrixXd& rhs) const;
  Eigen::MatrixXd solve_pinned(const Eigen::MatrixXd& rhs) const;

  std::shared_ptr<const Mesh> mesh_;
  PiecewiseLinearConductivity gamma_;
  SolverOptions options_;
  SparseMatrix stiffness_;
  std::vector<int> sigma_nodes_;
  std::vector<int> boundary_nodes_;
  std::vector<int> interior_nodes_;
  std::vector<int> interior_index_;  // node -> position in interior_nodes_, or -1
  SparseMatrix k_ii_;
  SparseMatrix k_ib_;  // interior rows, boundary columns
  std::shared_ptr<Factorizations> factors_;
};

/// Gradient of u on triangle t.
Vec2 field_gradient(const Mesh& mesh, const Field& u, int t);

/// P1 interpolation of u at x; throws OutsideDomainError off the mesh.
double field_value(const Mesh& mesh, const Field& u, const Vec2& x);

/// Nodal load of a unit point source at y: the hat functions evaluated at y.
Field point_load(const Mesh& mesh, const Vec2& y);

/// Load of the source derivative along e: (grad phi_p(y) . e)_p.
Field dipole_load(const Mesh& mesh, const Vec2& y, const Vec2& e);

void write_field(std::ostream& out, const Mesh& mesh, const Field& u);

}  // namespace calderon
