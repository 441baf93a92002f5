#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "calderon/geometry.hpp"

namespace calderon {

/// gamma_j(x) = a + A . x on one subdomain.
struct AffinePiece {
  double a = 1.0;
  Vec2 A = Vec2::Zero();

  double operator()(const Vec2& x) const { return a + A.dot(x); }
};

/// Piecewise-affine coefficient over a fixed partition. With `resistivity`
/// set, the pieces describe rho and the conductivity is 1 / rho.
class PiecewiseLinearConductivity {
 public:
  PiecewiseLinearConductivity() = default;
  PiecewiseLinearConductivity(std::vector<AffinePiece> pieces, double lambda,
                              bool resistivity = false);

  static PiecewiseLinearConductivity constant(int num_subdomains, double value, double lambda);

  /// Layout (a_1, A_1x, A_1y, a_2, ...).
  static PiecewiseLinearConductivity from_coefficients(const Eigen::VectorXd& coefficients,
                                                       double lambda, bool resistivity = false);
  Eigen::VectorXd coefficients() const;

  int num_pieces() const { return static_cast<int>(pieces_.size()); }
  const std::vector<AffinePiece>& pieces() const { return pieces_; }
  const AffinePiece& piece(int id) const { return pieces_.at(id - 1); }
  double lambda() const { return lambda_; }
  bool resistivity() const { return resistivity_; }

  /// Conductivity of subdomain `id` at x (no containment check).
  double value(int id, const Vec2& x) const;

  /// lambda^-1 <= piece <= lambda at every vertex of every subdomain.
  bool is_admissible(const DomainPartition& partition, double slack = 1e-12) const;
  void require_admissible(const DomainPartition& partition) const;

 private:
  std::vector<AffinePiece> pieces_;
  double lambda_ = 1.0;
  bool resistivity_ = false;
};

/// gamma(x), taking the lowest-index subdomain on interfaces.
double evaluate(const PiecewiseLinearConductivity& gamma, const DomainPartition& partition,
                const Vec2& x);

/// max_j max over the vertices of D_j of |gamma1 - gamma2|.
double sup_norm(const PiecewiseLinearConductivity& gamma1,
                const PiecewiseLinearConductivity& gamma2, const DomainPartition& partition);

/// max_j (|a_j| + |A_j|).
double coefficient_norm(const PiecewiseLinearConductivity& gamma);

PiecewiseLinearConductivity random_admissible(const DomainPartition& partition, double lambda,
                                              std::uint64_t seed);

/// gamma on Omega extended by 1 on the augmentation box (id N + 1).
PiecewiseLinearConductivity extend_by_one(const PiecewiseLinearConductivity& gamma);

}  // namespace calderon
