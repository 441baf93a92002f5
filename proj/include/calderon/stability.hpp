#pragma once

#include <cstdint>
#include <vector>

#include "calderon/conductivity.hpp"
#include "calderon/geometry.hpp"
#include "calderon/maps.hpp"
#include "calderon/mesh.hpp"

namespace calderon {

/// omega_b(t) = 2^b e^-2 |log t|^-b on (0, e^-2), e^-2 beyond.
double omega(double b, double t);
/// j-fold composition; j = 0 is the identity.
double omega_iter(double b, int j, double t);
/// Inverse of omega_iter on (0, e^-2) by bisection. Throws RangeError for s
/// outside the range (0, e^-2).
double omega_inverse_iter(double b, int j, double s);

struct ContinuationSchedule {
  double L = 1.0;
  double r0 = 1.0;
  double beta = 0.0;
  double beta1 = 0.0;
  double a = 0.0;
  double lambda1 = 0.0;
  double rho1 = 0.0;

  double lambda(int m) const;
  double rho(int m) const;
  double d(int m) const { return lambda(m) - rho(m); }
};

ContinuationSchedule schedule(double L, double r0);
/// min{m >= 1 : d_m <= r}; throws RangeError unless 0 < r <= d_1.
int h_bar(const ContinuationSchedule& s, double r);
/// Q - lambda_m nu.
Vec2 w_point(const Vec2& q, const Vec2& nu, const ContinuationSchedule& s, int m);

struct StabilitySample {
  int id = 0;
  std::uint64_t seed = 0;
  bool structured = false;
  double sup_norm = 0.0;
  double map_norm = 0.0;
  double ratio = 0.0;
};

struct StabilityReport {
  std::vector<StabilitySample> samples;
  double c_emp = 0.0;
  double c_structured = 0.0;  // max over the structured pairs only
  int num_subdomains = 0;
  int chain_length = 0;
};

struct StabilityOptions {
  double h = 0.1;
  int num_samples = 8;
  std::uint64_t seed = 1;
  // Relative size of the structured perturbations on the deepest subdomain.
  double structured_scale = 0.25;
};

/// Empirical lower bound on the Lipschitz constant: max over sampled pairs
/// of |gamma1 - gamma2|_inf / |Lambda_1 - Lambda_2|_*. Half of the pairs
/// differ only on the last subdomain of the longest chain.
StabilityReport estimate_lipschitz_constant(const DomainPartition& partition, double lambda,
                                            const StabilityOptions& options);

/// Ratio for one pair on a given mesh.
StabilitySample stability_ratio(const Mesh& mesh, const DomainPartition& partition,
                                const PiecewiseLinearConductivity& gamma1,
                                const PiecewiseLinearConductivity& gamma2);

struct BlowUpRow {
  double r = 0.0;
  int m = 0;
  Vec2 w = Vec2::Zero();
  double sigma = 0.0;  // distance of w from the interface
  double value = 0.0;  // |S_{U_k}(w, w)|
  double mixed = 0.0;  // |d_nu d_nu S_{U_k}(w, w)|
};

struct BlowUpTable {
  std::vector<BlowUpRow> rows;
  double value_exponent = 0.0;  // fitted against sigma
  double mixed_exponent = 0.0;
};

struct BlowUpOptions {
  int interface_k = 1;  // probes approach Sigma_{k+1} from D_{j_k}
  std::vector<double> radii;
  double h_far = 0.1;
  double grading = 0.2;
  int target = 0;  // chain target; 0 selects the last subdomain
};

/// Evaluates S_{U_k}(w, w) and its normal-normal mixed derivative on the
/// augmented domain, for w = w_{h_bar(r)}(Q_{k+1}), U_k the chain members
/// beyond j_k (and the rest of Omega not in W_k).
BlowUpTable blow_up_study(const DomainPartition& partition,
                          const PiecewiseLinearConductivity& gamma1,
                          const PiecewiseLinearConductivity& gamma2, const BlowUpOptions& options);

}  // namespace calderon
