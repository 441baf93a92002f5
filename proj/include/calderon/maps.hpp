#pragma once

#include <iosfwd>
#include <vector>

#include <Eigen/Core>

#include "calderon/fem.hpp"

namespace calderon {

enum class DtoNMethod {
  kAuto,     // Schur complement below 2000 dofs, column solves above
  kSchur,    // K_SS - K_SI K_II^-1 K_IS
  kColumns,  // energy pairings of the harmonic extensions
};

/// Local Dirichlet-to-Neumann map on the Sigma nodes of a system together
/// with the discrete H^{1/2}(Sigma) Gram matrix.
struct LocalDtoNMap {
  Eigen::MatrixXd matrix;
  std::vector<int> sigma_nodes;
  Eigen::MatrixXd fractional_metric;
};

LocalDtoNMap assemble_dton(const FemSystem& system, DtoNMethod method = DtoNMethod::kAuto);

/// Columns: discrete harmonic extensions of the Sigma hat functions.
Eigen::MatrixXd harmonic_extensions(const FemSystem& system);

/// Inverse of the DtoN matrix on zero-sum vectors (zero-sum output).
/// Throws SingularMapError when the restriction is numerically singular.
Eigen::MatrixXd assemble_ntod(const Eigen::MatrixXd& dton);

/// Theta = M^{1/2} (I + Delta_Sigma)^{1/2} M^{1/2} in the generalized eigenbasis of
/// the 1D stiffness/mass pair on the Sigma path (Dirichlet at open ends).
Eigen::MatrixXd fractional_metric(const Mesh& mesh);

/// max_g |dL g|_{Theta^-1} / |g|_Theta. Throws MetricError unless Theta is
/// symmetric positive definite.
double operator_norm(const Eigen::MatrixXd& delta, const Eigen::MatrixXd& metric);

void write_matrix(std::ostream& out, const Mesh& mesh, const std::vector<int>& nodes,
                  const Eigen::MatrixXd& matrix);

}  // namespace calderon
