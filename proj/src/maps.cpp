#include "calderon/maps.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "calderon/errors.hpp"

namespace calderon {

Eigen::MatrixXd harmonic_extensions(const FemSystem& system) {
  const int m = static_cast<int>(system.sigma_nodes().size());
  if (m == 0) throw PreconditionError("Sigma carries no interior nodes");
  return system.solve_dirichlet(Eigen::MatrixXd(Eigen::MatrixXd::Identity(m, m)));
}

LocalDtoNMap assemble_dton(const FemSystem& system, DtoNMethod method) {
  const auto& sigma = system.sigma_nodes();
  const int m = static_cast<int>(sigma.size());
  if (m == 0) throw PreconditionError("Sigma carries no interior nodes");
  if (method == DtoNMethod::kAuto) {
    method = system.num_dofs() < 2000 ? DtoNMethod::kSchur : DtoNMethod::kColumns;
  }
  LocalDtoNMap out;
  out.sigma_nodes = sigma;
  const SparseMatrix& k = system.stiffness();
  if (method == DtoNMethod::kColumns) {
    const Eigen::MatrixXd u = harmonic_extensions(system);
    out.matrix = u.transpose() * (k * u);
  } else {
    // Columns of K restricted to Sigma, with the Sigma rows split off.
    const auto& interior = system.interior_nodes();
    Eigen::MatrixXd k_is(interior.size(), m);
    Eigen::MatrixXd k_ss(m, m);
    Eigen::MatrixXd dense_cols = Eigen::MatrixXd::Zero(system.num_dofs(), m);
    for (int c = 0; c < m; ++c) {
      for (SparseMatrix::InnerIterator it(k, sigma[c]); it; ++it) dense_cols(it.row(), c) = it.value();
    }
    for (std::size_t i = 0; i < interior.size(); ++i) k_is.row(i) = dense_cols.row(interior[i]);
    for (int s = 0; s < m; ++s) k_ss.row(s) = dense_cols.row(sigma[s]);
    // solve_with_load solves with K_II on the interior rows of a nodal load.
    Eigen::MatrixXd load = Eigen::MatrixXd::Zero(system.num_dofs(), m);
    for (std::size_t i = 0; i < interior.size(); ++i) load.row(interior[i]) = k_is.row(i);
    const Eigen::MatrixXd x = system.solve_with_load(load);
    Eigen::MatrixXd x_i(interior.size(), m);
    for (std::size_t i = 0; i < interior.size(); ++i) x_i.row(i) = x.row(interior[i]);
    out.matrix = k_ss - k_is.transpose() * x_i;
  }
  out.fractional_metric = fractional_metric(system.mesh());
  return out;
}

Eigen::MatrixXd assemble_ntod(const Eigen::MatrixXd& dton) {
  const int m = static_cast<int>(dton.rows());
  if (m < 2 || dton.cols() != m) throw PreconditionError("DtoN matrix must be square, size >= 2");
  // Orthonormal basis of the zero-sum subspace from a Householder reflection of 1.
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(Eigen::MatrixXd::Ones(m, 1));
  const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(m, m);
  const Eigen::MatrixXd z = q.rightCols(m - 1);
  const Eigen::MatrixXd reduced = z.transpose() * dton * z;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (reduced + reduced.transpose()));
  const auto& ev = eig.eigenvalues();
  const double top = ev.cwiseAbs().maxCoeff();
  if (!(top > 0.0) || ev.cwiseAbs().minCoeff() < 1e-13 * top) {
    throw SingularMapError("DtoN map is singular on zero-sum Sigma data");
  }
  const Eigen::MatrixXd inv =
      eig.eigenvectors() * ev.cwiseInverse().asDiagonal() * eig.eigenvectors().transpose();
  return z * inv * z.transpose();
}

Eigen::MatrixXd fractional_metric(const Mesh& mesh) {
  const SigmaPath path = sigma_path(mesh);
  const int n = static_cast<int>(path.nodes.size());
  if (n < 2) throw MetricError("Sigma path has fewer than two nodes");
  // 1D P1 stiffness and mass along the path, all nodes.
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(n, n);
  Eigen::MatrixXd mass = Eigen::MatrixXd::Zero(n, n);
  const int edges = path.closed ? n : n - 1;
  for (int e = 0; e < edges; ++e) {
    const int i = e;
    const int j = (e + 1) % n;
    const double len = (mesh.vertices[path.nodes[i]] - mesh.vertices[path.nodes[j]]).norm();
    s(i, i) += 1.0 / len;
    s(j, j) += 1.0 / len;
    s(i, j) -= 1.0 / len;
    s(j, i) -= 1.0 / len;
    mass(i, i) += len / 3.0;
    mass(j, j) += len / 3.0;
    mass(i, j) += len / 6.0;
    mass(j, i) += len / 6.0;
  }
  if (!path.closed) {
    s = s.block(1, 1, n - 2, n - 2).eval();
    mass = mass.block(1, 1, n - 2, n - 2).eval();
  }
  if (s.rows() == 0) throw MetricError("Sigma carries no interior nodes");
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(s, mass);
  if (ges.info() != Eigen::Success) throw MetricError("generalized eigenproblem failed");
  const Eigen::MatrixXd& v = ges.eigenvectors();  // v^T M v = I
  const Eigen::VectorXd w = (1.0 + ges.eigenvalues().array().max(0.0)).sqrt();
  const Eigen::MatrixXd mv = mass * v;
  Eigen::MatrixXd theta = mv * w.asDiagonal() * mv.transpose();
  return 0.5 * (theta + theta.transpose());
}

double operator_norm(const Eigen::MatrixXd& delta, const Eigen::MatrixXd& metric) {
  if (delta.rows() != delta.cols() || metric.rows() != delta.rows() ||
      metric.cols() != delta.cols()) {
    throw PreconditionError("operator and metric sizes differ");
  }
  const double scale = metric.cwiseAbs().maxCoeff();
  if ((metric - metric.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw MetricError("metric is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(metric);
  const auto& ev = eig.eigenvalues();
  if (!(ev.minCoeff() > 1e-14 * std::max(scale, 1e-300))) {
    throw MetricError("metric is not positive definite");
  }
  const Eigen::MatrixXd inv_sqrt =
      eig.eigenvectors() * ev.cwiseSqrt().cwiseInverse().asDiagonal() * eig.eigenvectors().transpose();
  const Eigen::MatrixXd b = inv_sqrt * delta * inv_sqrt;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(b);
  return svd.singularValues().size() ? svd.singularValues()[0] : 0.0;
}

void write_matrix(std::ostream& out, const Mesh& mesh, const std::vector<int>& nodes,
                  const Eigen::MatrixXd& matrix) {
  out << std::setprecision(17) << "node\tx\ty";
  for (int q : nodes) out << "\tc" << q;
  out << '\n';
  for (std::size_t p = 0; p < nodes.size(); ++p) {
    const Vec2& v = mesh.vertices[nodes[p]];
    out << nodes[p] << '\t' << v.x() << '\t' << v.y();
    for (int q = 0; q < matrix.cols(); ++q) out << '\t' << matrix(p, q);
    out << '\n';
  }
}

}  // namespace calderon
