#include "calderon/conductivity.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "calderon/errors.hpp"

namespace calderon {

PiecewiseLinearConductivity::PiecewiseLinearConductivity(std::vector<AffinePiece> pieces,
                                                         double lambda, bool resistivity)
    : pieces_(std::move(pieces)), lambda_(lambda), resistivity_(resistivity) {
  if (!(lambda >= 1.0)) throw PreconditionError("ellipticity constant lambda must be >= 1");
}

PiecewiseLinearConductivity PiecewiseLinearConductivity::constant(int num_subdomains,
                                                                  double value, double lambda) {
  return {std::vector<AffinePiece>(num_subdomains, AffinePiece{value, Vec2::Zero()}), lambda};
}

PiecewiseLinearConductivity PiecewiseLinearConductivity::from_coefficients(
    const Eigen::VectorXd& coefficients, double lambda, bool resistivity) {
  if (coefficients.size() % 3 != 0) {
    throw PreconditionError("coefficient vector length must be a multiple of 3");
  }
  std::vector<AffinePiece> pieces(coefficients.size() / 3);
  for (std::size_t j = 0; j < pieces.size(); ++j) {
    pieces[j].a = coefficients[3 * j];
    pieces[j].A = {coefficients[3 * j + 1], coefficients[3 * j + 2]};
  }
  return {std::move(pieces), lambda, resistivity};
}

Eigen::VectorXd PiecewiseLinearConductivity::coefficients() const {
  Eigen::VectorXd c(3 * pieces_.size());
  for (std::size_t j = 0; j < pieces_.size(); ++j) {
    c[3 * j] = pieces_[j].a;
    c[3 * j + 1] = pieces_[j].A.x();
    c[3 * j + 2] = pieces_[j].A.y();
  }
  return c;
}

double PiecewiseLinearConductivity::value(int id, const Vec2& x) const {
  const double v = piece(id)(x);
  return resistivity_ ? 1.0 / v : v;
}

bool PiecewiseLinearConductivity::is_admissible(const DomainPartition& partition,
                                                double slack) const {
  if (num_pieces() < partition.num_subdomains()) return false;
  const double lo = 1.0 / lambda_ - slack;
  const double hi = lambda_ + slack;
  for (int id = 1; id <= partition.num_subdomains(); ++id) {
    for (const Vec2& v : partition.subdomain(id)) {
      const double g = piece(id)(v);
      if (!(g >= lo && g <= hi)) return false;
    }
  }
  return true;
}

void PiecewiseLinearConductivity::require_admissible(const DomainPartition& partition) const {
  if (num_pieces() != partition.num_subdomains()) {
    std::ostringstream msg;
    msg << "conductivity has " << num_pieces() << " pieces for " << partition.num_subdomains()
        << " subdomains";
    throw AdmissibilityError(msg.str());
  }
  if (!is_admissible(partition)) {
    throw AdmissibilityError("conductivity leaves [1/lambda, lambda] at a subdomain vertex");
  }
}

double evaluate(const PiecewiseLinearConductivity& gamma, const DomainPartition& partition,
                const Vec2& x) {
  const auto id = partition.locate(x);
  if (!id) throw OutsideDomainError("evaluation point outside the closure of Omega");
  return gamma.value(*id, x);
}

double sup_norm(const PiecewiseLinearConductivity& gamma1,
                const PiecewiseLinearConductivity& gamma2, const DomainPartition& partition) {
  double out = 0.0;
  for (int id = 1; id <= partition.num_subdomains(); ++id) {
    for (const Vec2& v : partition.subdomain(id)) {
      out = std::max(out, std::abs(gamma1.value(id, v) - gamma2.value(id, v)));
    }
  }
  return out;
}

double coefficient_norm(const PiecewiseLinearConductivity& gamma) {
  double out = 0.0;
  for (const auto& p : gamma.pieces()) out = std::max(out, std::abs(p.a) + p.A.norm());
  return out;
}

PiecewiseLinearConductivity random_admissible(const DomainPartition& partition, double lambda,
                                              std::uint64_t seed) {
  if (!(lambda >= 1.0)) throw PreconditionError("lambda must be >= 1");
  const int n = partition.num_subdomains();
  if (lambda == 1.0) return PiecewiseLinearConductivity::constant(n, 1.0, 1.0);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double log_lambda = std::log(lambda);
  for (int attempt = 0; attempt < 10000; ++attempt) {
    std::vector<AffinePiece> pieces(n);
    for (int id = 1; id <= n; ++id) {
      const auto& poly = partition.subdomain(id);
      Vec2 c = Vec2::Zero();
      for (const Vec2& v : poly) c += v;
      c /= static_cast<double>(poly.size());
      double reach = 0.0;
      for (const Vec2& v : poly) reach = std::max(reach, (v - c).norm());
      // Centre value log-uniform in [1/lambda, lambda], slope limited by the
      // distance to the nearer bound.
      const double centre = std::exp(log_lambda * (2.0 * unit(rng) - 1.0));
      const double room = std::min(centre - 1.0 / lambda, lambda - centre);
      const double angle = 2.0 * std::numbers::pi * unit(rng);
      const double slope = unit(rng) * room / reach;
      const Vec2 A = slope * Vec2(std::cos(angle), std::sin(angle));
      pieces[id - 1] = {centre - A.dot(c), A};
    }
    PiecewiseLinearConductivity gamma(std::move(pieces), lambda);
    if (gamma.is_admissible(partition, 0.0)) return gamma;
  }
  throw SamplerError("no admissible conductivity after 10^4 attempts");
}

PiecewiseLinearConductivity extend_by_one(const PiecewiseLinearConductivity& gamma) {
  std::vector<AffinePiece> pieces = gamma.pieces();
  pieces.push_back({1.0, Vec2::Zero()});
  return {std::move(pieces), gamma.lambda(), gamma.resistivity()};
}

}  // namespace calderon
