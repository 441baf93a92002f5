#include "calderon/stability.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "calderon/errors.hpp"
#include "calderon/fem.hpp"
#include "calderon/greens.hpp"

namespace calderon {

namespace {

constexpr double kCap = -2.0;  // log of e^-2

// omega_b in log variables: u = log t, returns log omega_b(t).
double log_omega(double b, double u) {
  if (u >= kCap) return kCap;
  return b * std::log(2.0) + kCap - b * std::log(-u);
}

double log_omega_iter(double b, int j, double u) {
  for (int i = 0; i < j; ++i) u = log_omega(b, u);
  return u;
}

}  // namespace

double omega(double b, double t) {
  if (!(b > 0.0)) throw PreconditionError("omega needs b > 0");
  if (!(t > 0.0)) throw PreconditionError("omega is defined for t > 0");
  if (t >= std::exp(kCap)) return std::exp(kCap);
  return std::pow(2.0, b) * std::exp(kCap) * std::pow(std::abs(std::log(t)), -b);
}

double omega_iter(double b, int j, double t) {
  if (j < 0) throw PreconditionError("iteration count must be non-negative");
  for (int i = 0; i < j; ++i) t = omega(b, t);
  return t;
}

double omega_inverse_iter(double b, int j, double s) {
  if (!(b > 0.0)) throw PreconditionError("omega needs b > 0");
  if (j < 0) throw PreconditionError("iteration count must be non-negative");
  if (j == 0) return s;
  if (!(s > 0.0) || !(s < std::exp(kCap))) {
    throw RangeError("value outside the range (0, e^-2) of the iterated modulus");
  }
  const double target = std::log(s);
  double hi = kCap;
  double lo = 2.0 * kCap;
  while (log_omega_iter(b, j, lo) > target) {
    lo *= 2.0;
    if (lo < -1e300) throw RangeError("preimage is not representable");
  }
  while (hi - lo > 1e-13 * std::max(1.0, std::abs(lo))) {
    const double mid = 0.5 * (lo + hi);
    if (log_omega_iter(b, j, mid) > target) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  const double u = 0.5 * (lo + hi);
  if (u < -745.0) throw RangeError("preimage underflows double precision");
  return std::exp(u);
}

double ContinuationSchedule::lambda(int m) const {
  if (m < 1) throw PreconditionError("schedule index starts at 1");
  double v = lambda1;
  for (int i = 1; i < m; ++i) v *= a;
  return v;
}

double ContinuationSchedule::rho(int m) const {
  if (m < 1) throw PreconditionError("schedule index starts at 1");
  double v = rho1;
  for (int i = 1; i < m; ++i) v *= a;
  return v;
}

ContinuationSchedule schedule(double L, double r0) {
  if (!(L > 0.0) || !(r0 > 0.0)) throw PreconditionError("schedule needs L > 0 and r0 > 0");
  ContinuationSchedule s;
  s.L = L;
  s.r0 = r0;
  s.beta = std::atan(1.0 / L);
  s.beta1 = std::atan(std::sin(s.beta) / 4.0);
  const double sb1 = std::sin(s.beta1);
  s.lambda1 = r0 / (1.0 + sb1);
  s.rho1 = s.lambda1 * sb1;
  s.a = (1.0 - sb1) / (1.0 + sb1);
  return s;
}

int h_bar(const ContinuationSchedule& s, double r) {
  if (!(r > 0.0) || r > s.d(1)) throw RangeError("h_bar needs 0 < r <= d_1");
  int m = 1;
  double lambda = s.lambda1;
  double rho = s.rho1;
  while (lambda - rho > r) {
    lambda *= s.a;
    rho *= s.a;
    ++m;
  }
  return m;
}

Vec2 w_point(const Vec2& q, const Vec2& nu, const ContinuationSchedule& s, int m) {
  return q - s.lambda(m) * nu;
}

StabilitySample stability_ratio(const Mesh& mesh, const DomainPartition& partition,
                                const PiecewiseLinearConductivity& gamma1,
                                const PiecewiseLinearConductivity& gamma2) {
  auto shared = std::make_shared<const Mesh>(mesh);
  const LocalDtoNMap map1 = assemble_dton(FemSystem::assemble(shared, gamma1));
  const LocalDtoNMap map2 = assemble_dton(FemSystem::assemble(shared, gamma2));
  StabilitySample s;
  s.sup_norm = sup_norm(gamma1, gamma2, partition);
  s.map_norm = operator_norm(map1.matrix - map2.matrix, map1.fractional_metric);
  s.ratio = s.map_norm > 0.0 ? s.sup_norm / s.map_norm : 0.0;
  return s;
}

namespace {

// gamma with the piece of subdomain `id` shifted by a random affine function,
// halved until the result is admissible.
PiecewiseLinearConductivity perturb_piece(const PiecewiseLinearConductivity& gamma,
                                          const DomainPartition& partition, int id, double scale,
                                          std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const auto& poly = partition.subdomain(id);
  double reach = 0.0;
  Vec2 c = Vec2::Zero();
  for (const Vec2& v : poly) c += v;
  c /= static_cast<double>(poly.size());
  for (const Vec2& v : poly) reach = std::max(reach, (v - c).norm());
  const double shift = scale * (unit(rng) >= 0.0 ? 1.0 : -1.0) * (0.5 + 0.5 * std::abs(unit(rng)));
  const Vec2 slope = 0.5 * scale / reach * Vec2(unit(rng), unit(rng));
  for (int halving = 0; halving < 60; ++halving) {
    const double f = std::ldexp(1.0, -halving);
    std::vector<AffinePiece> pieces = gamma.pieces();
    AffinePiece& p = pieces[id - 1];
    p.a += f * (shift - slope.dot(c));
    p.A += f * slope;
    PiecewiseLinearConductivity out(std::move(pieces), gamma.lambda(), gamma.resistivity());
    if (out.is_admissible(partition, 0.0)) return out;
  }
  throw SamplerError("no admissible perturbation of the last chain subdomain");
}

}  // namespace

StabilityReport estimate_lipschitz_constant(const DomainPartition& partition, double lambda,
                                            const StabilityOptions& options) {
  if (options.num_samples < 2) throw PreconditionError("need at least two samples");
  if (!(lambda > 1.0)) throw PreconditionError("stability sampling needs lambda > 1");
  const Mesh mesh = triangulate(partition, options.h);

  // Deepest subdomain along the flat-portion graph.
  Chain longest = find_chain(partition, 1);
  for (int id = 2; id <= partition.num_subdomains(); ++id) {
    try {
      Chain c = find_chain(partition, id);
      if (c.length() > longest.length()) longest = std::move(c);
    } catch (const NoChainError&) {
    }
  }
  const int last = longest.ids.back();

  StabilityReport report;
  report.num_subdomains = partition.num_subdomains();
  report.chain_length = longest.length();
  for (int i = 0; i < options.num_samples; ++i) {
    const std::uint64_t seed = options.seed * 1000003ULL + static_cast<std::uint64_t>(i);
    const bool structured = (i % 2) == 0;
    const PiecewiseLinearConductivity g1 = random_admissible(partition, lambda, seed);
    PiecewiseLinearConductivity g2;
    if (structured) {
      std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
      g2 = perturb_piece(g1, partition, last, options.structured_scale, rng);
    } else {
      g2 = random_admissible(partition, lambda, seed + 0x5851f42d4c957f2dULL);
    }
    StabilitySample s = stability_ratio(mesh, partition, g1, g2);
    if (!(s.map_norm > 0.0) || !(s.sup_norm > 0.0)) continue;
    s.id = i;
    s.seed = seed;
    s.structured = structured;
    report.samples.push_back(s);
    report.c_emp = std::max(report.c_emp, s.ratio);
    if (structured) report.c_structured = std::max(report.c_structured, s.ratio);
  }
  return report;
}

BlowUpTable blow_up_study(const DomainPartition& partition,
                          const PiecewiseLinearConductivity& gamma1,
                          const PiecewiseLinearConductivity& gamma2, const BlowUpOptions& options) {
  int target = options.target;
  if (target == 0) target = partition.num_subdomains();
  const Chain chain = find_chain(partition, target);
  const int k = options.interface_k;
  if (k < 1 || k >= chain.length()) {
    throw PreconditionError("interface index k must satisfy 1 <= k < chain length");
  }
  const InterfacePortion& portion = chain.portions[k];  // Sigma_{k+1}
  const Vec2 q = portion.center;
  const Vec2 nu = -portion.normal;  // exterior normal of D_{j_k}
  const ContinuationSchedule sched = schedule(partition.lipschitz_L(), partition.r0());

  std::vector<double> radii = options.radii;
  if (radii.empty()) {
    for (int i = 0; i < 4; ++i) radii.push_back(0.01 * partition.r0() * std::pow(0.25, i));
  }
  std::vector<int> ms;
  std::vector<Vec2> ws;
  for (double r : radii) {
    const int m = h_bar(sched, r);
    ms.push_back(m);
    ws.push_back(w_point(q, nu, sched, m));
  }

  const AugmentedDomain aug = augment(partition);
  double sigma_min = std::numeric_limits<double>::infinity();
  for (int m : ms) sigma_min = std::min(sigma_min, sched.lambda(m));
  MeshOptions mesh_options;
  mesh_options.h_target = std::min(options.h_far, partition.r0());
  const double grading = options.grading;
  const double h_min = grading * sigma_min / 2.0;
  mesh_options.size_field = [q, grading, h_min](const Vec2& x) {
    return std::max(h_min, grading * (x - q).norm());
  };
  mesh_options.fixed_points = ws;
  mesh_options.fixed_points.push_back(q);
  auto mesh = std::make_shared<const Mesh>(triangulate(aug.partition, mesh_options));

  const FemSystem s1 = FemSystem::assemble(mesh, extend_by_one(gamma1));
  const FemSystem s2 = FemSystem::assemble(mesh, extend_by_one(gamma2));
  std::vector<int> region;
  for (int id = 1; id <= partition.num_subdomains(); ++id) {
    if (std::find(chain.ids.begin(), chain.ids.begin() + k, id) == chain.ids.begin() + k) {
      region.push_back(id);
    }
  }
  const SingularSolution sing(s1, s2, region, aug.partition);

  BlowUpTable table;
  std::vector<double> sigmas, values, mixeds;
  for (std::size_t i = 0; i < radii.size(); ++i) {
    BlowUpRow row;
    row.r = radii[i];
    row.m = ms[i];
    row.w = ws[i];
    row.sigma = sched.lambda(ms[i]);
    row.value = std::abs(sing.value(row.w, row.w));
    row.mixed = std::abs(sing.mixed(row.w, row.w, nu, nu));
    table.rows.push_back(row);
    sigmas.push_back(row.sigma);
    values.push_back(row.value);
    mixeds.push_back(row.mixed);
  }
  auto positive = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return x > 0.0; });
  };
  // Distinct radii can share h_bar and hence the probe; fit on distinct sigmas.
  std::vector<double> us, uv, um;
  for (std::size_t i = 0; i < sigmas.size(); ++i) {
    if (i > 0 && sigmas[i] == sigmas[i - 1]) continue;
    us.push_back(sigmas[i]);
    uv.push_back(values[i]);
    um.push_back(mixeds[i]);
  }
  if (us.size() >= 2 && positive(uv)) table.value_exponent = fit_exponent(us, uv);
  if (us.size() >= 2 && positive(um)) table.mixed_exponent = fit_exponent(us, um);
  return table;
}

}  // namespace calderon
