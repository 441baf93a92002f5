#include "calderon/fem.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>

#include "calderon/errors.hpp"

namespace calderon {

Eigen::Matrix3d element_stiffness(const Mesh& mesh, int t) {
  const double area = mesh.area(t);
  if (!(area > 0.0) || !std::isfinite(area)) {
    throw DegenerateTriangleError("triangle " + std::to_string(t) + " has non-positive area");
  }
  const Eigen::Matrix<double, 3, 2> g = mesh.basis_gradients(t);
  return area * g * g.transpose();
}

SparseMatrix assemble_stiffness(const Mesh& mesh, const PiecewiseLinearConductivity& gamma,
                                const std::vector<bool>& keep) {
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(9 * mesh.triangles.size());
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    if (!keep.empty() && !keep[t]) continue;
    const double g = gamma.value(mesh.triangle_subdomain[t], mesh.centroid(t));
    const Eigen::Matrix3d ke = g * element_stiffness(mesh, t);
    const auto& tri = mesh.triangles[t];
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) triplets.emplace_back(tri[i], tri[j], ke(i, j));
    }
  }
  SparseMatrix k(mesh.num_vertices(), mesh.num_vertices());
  k.setFromTriplets(triplets.begin(), triplets.end());
  return k;
}

namespace {

using Cholesky = Eigen::SimplicialLDLT<SparseMatrix>;
using Cg = Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper,
                                    Eigen::DiagonalPreconditioner<double>>;

SparseMatrix submatrix(const SparseMatrix& k, const std::vector<int>& row_index,
                       const std::vector<int>& col_index, int rows, int cols) {
  std::vector<Eigen::Triplet<double>> triplets;
  for (int c = 0; c < k.outerSize(); ++c) {
    for (SparseMatrix::InnerIterator it(k, c); it; ++it) {
      const int r = row_index[it.row()];
      const int cc = col_index[it.col()];
      if (r >= 0 && cc >= 0) triplets.emplace_back(r, cc, it.value());
    }
  }
  SparseMatrix out(rows, cols);
  out.setFromTriplets(triplets.begin(), triplets.end());
  return out;
}

}  // namespace

struct FemSystem::Factorizations {
  std::unique_ptr<Cholesky> interior;
  std::unique_ptr<Cholesky> pinned;
  SparseMatrix k_pinned;
};

FemSystem FemSystem::assemble(const Mesh& mesh, const PiecewiseLinearConductivity& gamma,
                              SolverOptions options) {
  return assemble(std::make_shared<const Mesh>(mesh), gamma, options);
}

FemSystem FemSystem::assemble(std::shared_ptr<const Mesh> mesh,
                              const PiecewiseLinearConductivity& gamma, SolverOptions options) {
  FemSystem s;
  s.mesh_ = std::move(mesh);
  s.gamma_ = gamma;
  s.options_ = options;
  const Mesh& m = *s.mesh_;
  if (gamma.num_pieces() < *std::max_element(m.triangle_subdomain.begin(), m.triangle_subdomain.end())) {
    throw PreconditionError("conductivity has fewer pieces than the mesh has subdomains");
  }
  s.stiffness_ = assemble_stiffness(m, gamma);
  s.boundary_nodes_ = m.boundary_nodes();
  std::vector<bool> on_boundary(m.num_vertices(), false);
  for (int v : s.boundary_nodes_) on_boundary[v] = true;
  s.interior_index_.assign(m.num_vertices(), -1);
  std::vector<int> boundary_index(m.num_vertices(), -1);
  for (int v = 0; v < m.num_vertices(); ++v) {
    if (on_boundary[v]) {
      boundary_index[v] = 0;
    } else {
      s.interior_index_[v] = static_cast<int>(s.interior_nodes_.size());
      s.interior_nodes_.push_back(v);
    }
  }
  for (std::size_t i = 0; i < s.boundary_nodes_.size(); ++i) {
    boundary_index[s.boundary_nodes_[i]] = static_cast<int>(i);
  }
  s.sigma_nodes_ = sigma_path(m).interior();
  const int ni = static_cast<int>(s.interior_nodes_.size());
  const int nb = static_cast<int>(s.boundary_nodes_.size());
  s.k_ii_ = submatrix(s.stiffness_, s.interior_index_, s.interior_index_, ni, ni);
  s.k_ib_ = submatrix(s.stiffness_, s.interior_index_, boundary_index, ni, nb);
  s.factors_ = std::make_shared<Factorizations>();
  return s;
}

namespace {

Eigen::MatrixXd run_solver(const SparseMatrix& a, std::unique_ptr<Cholesky>& cache,
                           const SolverOptions& options, const Eigen::MatrixXd& rhs) {
  if (a.rows() == 0) return Eigen::MatrixXd(0, rhs.cols());
  if (options.kind == LinearSolver::kDirect) {
    if (!cache) {
      cache = std::make_unique<Cholesky>(a);
      if (cache->info() != Eigen::Success) {
        cache.reset();
        throw SolverError("sparse Cholesky factorization failed");
      }
    }
    Eigen::MatrixXd x = cache->solve(rhs);
    if (cache->info() != Eigen::Success || !x.allFinite()) {
      throw SolverError("sparse Cholesky solve failed");
    }
    return x;
  }
  Cg cg;
  cg.setTolerance(options.tolerance);
  cg.setMaxIterations(10 * static_cast<int>(a.rows()));
  cg.compute(a);
  Eigen::MatrixXd x(a.rows(), rhs.cols());
  for (int c = 0; c < rhs.cols(); ++c) {
    if (rhs.col(c).squaredNorm() == 0.0) {
      x.col(c).setZero();
      continue;
    }
    x.col(c) = cg.solve(rhs.col(c));
    if (cg.info() != Eigen::Success) {
      throw SolverError("conjugate gradients did not reach the tolerance in 10 N iterations");
    }
  }
  return x;
}

}  // namespace

Eigen::MatrixXd FemSystem::solve_interior(const Eigen::MatrixXd& rhs) const {
  return run_solver(k_ii_, factors_->interior, options_, rhs);
}

Eigen::MatrixXd FemSystem::solve_pinned(const Eigen::MatrixXd& rhs) const {
  if (factors_->k_pinned.rows() == 0 && num_dofs() > 1) {
    std::vector<int> index(num_dofs());
    for (int v = 0; v < num_dofs(); ++v) index[v] = v - 1;
    factors_->k_pinned = submatrix(stiffness_, index, index, num_dofs() - 1, num_dofs() - 1);
  }
  return run_solver(factors_->k_pinned, factors_->pinned, options_, rhs);
}

Field FemSystem::solve_dirichlet(const Eigen::VectorXd& g_sigma) const {
  return solve_dirichlet(Eigen::MatrixXd(g_sigma)).col(0);
}

Eigen::MatrixXd FemSystem::solve_dirichlet(const Eigen::MatrixXd& g_sigma) const {
  if (g_sigma.rows() != static_cast<int>(sigma_nodes_.size())) {
    throw PreconditionError("Dirichlet data must have one value per Sigma node");
  }
  const int cols = static_cast<int>(g_sigma.cols());
  Eigen::MatrixXd ub = Eigen::MatrixXd::Zero(boundary_nodes_.size(), cols);
  std::vector<int> position(num_dofs(), -1);
  for (std::size_t i = 0; i < boundary_nodes_.size(); ++i) position[boundary_nodes_[i]] = static_cast<int>(i);
  for (std::size_t s = 0; s < sigma_nodes_.size(); ++s) ub.row(position[sigma_nodes_[s]]) = g_sigma.row(s);
  const Eigen::MatrixXd ui = solve_interior(-(k_ib_ * ub));
  Eigen::MatrixXd u(num_dofs(), cols);
  for (std::size_t i = 0; i < boundary_nodes_.size(); ++i) u.row(boundary_nodes_[i]) = ub.row(i);
  for (std::size_t i = 0; i < interior_nodes_.size(); ++i) u.row(interior_nodes_[i]) = ui.row(i);
  return u;
}

Field FemSystem::solve_dirichlet_full(const Field& g) const {
  if (g.size() != num_dofs()) throw PreconditionError("boundary data must be a nodal vector");
  Eigen::VectorXd ub(boundary_nodes_.size());
  for (std::size_t i = 0; i < boundary_nodes_.size(); ++i) ub[i] = g[boundary_nodes_[i]];
  const Eigen::VectorXd ui = solve_interior(-(k_ib_ * ub)).col(0);
  Field u(num_dofs());
  for (std::size_t i = 0; i < boundary_nodes_.size(); ++i) u[boundary_nodes_[i]] = ub[i];
  for (std::size_t i = 0; i < interior_nodes_.size(); ++i) u[interior_nodes_[i]] = ui[i];
  return u;
}

Field FemSystem::solve_with_load(const Field& f) const {
  return solve_with_load(Eigen::MatrixXd(f)).col(0);
}

Eigen::MatrixXd FemSystem::solve_with_load(const Eigen::MatrixXd& f) const {
  if (f.rows() != num_dofs()) throw PreconditionError("load must be a nodal vector");
  Eigen::MatrixXd fi(interior_nodes_.size(), f.cols());
  for (std::size_t i = 0; i < interior_nodes_.size(); ++i) fi.row(i) = f.row(interior_nodes_[i]);
  const Eigen::MatrixXd ui = solve_interior(fi);
  Eigen::MatrixXd u = Eigen::MatrixXd::Zero(num_dofs(), f.cols());
  for (std::size_t i = 0; i < interior_nodes_.size(); ++i) u.row(interior_nodes_[i]) = ui.row(i);
  return u;
}

double FemSystem::integral(const Field& u) const {
  const Mesh& m = *mesh_;
  double sum = 0.0;
  for (int t = 0; t < m.num_triangles(); ++t) {
    const auto& tri = m.triangles[t];
    sum += m.area(t) * (u[tri[0]] + u[tri[1]] + u[tri[2]]) / 3.0;
  }
  return sum;
}

Field FemSystem::solve_neumann_load(const Field& load) const {
  if (load.size() != num_dofs()) throw PreconditionError("load must be a nodal vector");
  const double total = load.sum();
  if (std::abs(total) > 1e-12 * std::max(1.0, load.cwiseAbs().sum())) {
    throw CompatibilityError("Neumann data must have zero mean (total " + std::to_string(total) + ")");
  }
  Field u = Field::Zero(num_dofs());
  if (num_dofs() > 1) u.tail(num_dofs() - 1) = solve_pinned(load.tail(num_dofs() - 1)).col(0);
  double area = 0.0;
  for (int t = 0; t < mesh_->num_triangles(); ++t) area += mesh_->area(t);
  u.array() -= integral(u) / area;
  return u;
}

Field FemSystem::boundary_load(const Field& flux) const {
  if (flux.size() != num_dofs()) throw PreconditionError("flux must be a nodal vector");
  Field b = Field::Zero(num_dofs());
  for (const auto& e : mesh_->boundary_edges) {
    const double len = (mesh_->vertices[e.a] - mesh_->vertices[e.b]).norm();
    b[e.a] += len * (2.0 * flux[e.a] + flux[e.b]) / 6.0;
    b[e.b] += len * (flux[e.a] + 2.0 * flux[e.b]) / 6.0;
  }
  return b;
}

Field FemSystem::solve_neumann(const Field& flux) const {
  return solve_neumann_load(boundary_load(flux));
}

Vec2 field_gradient(const Mesh& mesh, const Field& u, int t) {
  const auto g = mesh.basis_gradients(t);
  const auto& tri = mesh.triangles[t];
  return g.row(0).transpose() * u[tri[0]] + g.row(1).transpose() * u[tri[1]] +
         g.row(2).transpose() * u[tri[2]];
}

double field_value(const Mesh& mesh, const Field& u, const Vec2& x) {
  const auto loc = mesh.locate(x);
  if (!loc) throw OutsideDomainError("point outside the mesh");
  const auto& tri = mesh.triangles[loc->triangle];
  return loc->barycentric[0] * u[tri[0]] + loc->barycentric[1] * u[tri[1]] +
         loc->barycentric[2] * u[tri[2]];
}

Field point_load(const Mesh& mesh, const Vec2& y) {
  const auto loc = mesh.locate(y);
  if (!loc) throw OutsideDomainError("source point outside the mesh");
  Field f = Field::Zero(mesh.num_vertices());
  const auto& tri = mesh.triangles[loc->triangle];
  for (int k = 0; k < 3; ++k) f[tri[k]] += loc->barycentric[k];
  return f;
}

Field dipole_load(const Mesh& mesh, const Vec2& y, const Vec2& e) {
  const auto loc = mesh.locate(y);
  if (!loc) throw OutsideDomainError("source point outside the mesh");
  Field f = Field::Zero(mesh.num_vertices());
  const auto& tri = mesh.triangles[loc->triangle];
  const auto g = mesh.basis_gradients(loc->triangle);
  for (int k = 0; k < 3; ++k) f[tri[k]] += g.row(k).dot(e);
  return f;
}

void write_field(std::ostream& out, const Mesh& mesh, const Field& u) {
  out << std::setprecision(17) << "x\ty\tu\n";
  for (int v = 0; v < mesh.num_vertices(); ++v) {
    out << mesh.vertices[v].x() << '\t' << mesh.vertices[v].y() << '\t' << u[v] << '\n';
  }
}

}  // namespace calderon
