#include "calderon/inversion.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>

#include <Eigen/Dense>

#include "calderon/errors.hpp"
#include "calderon/maps.hpp"

namespace calderon {

namespace {

// Upper triangle with sqrt(2) off-diagonal weights: |vec(M)| = |M|_F for symmetric M.
Eigen::VectorXd vec_sym(const Eigen::MatrixXd& m) {
  const int n = static_cast<int>(m.rows());
  Eigen::VectorXd v(n * (n + 1) / 2);
  int k = 0;
  for (int i = 0; i < n; ++i) {
    v[k++] = m(i, i);
    for (int j = i + 1; j < n; ++j) v[k++] = std::sqrt(2.0) * 0.5 * (m(i, j) + m(j, i));
  }
  return v;
}

bool positive(const PiecewiseLinearConductivity& g, const DomainPartition& partition) {
  for (int id = 1; id <= partition.num_subdomains(); ++id) {
    for (const Vec2& v : partition.subdomain(id)) {
      if (!(g.piece(id)(v) > 0.0)) return false;
    }
  }
  return true;
}

struct Evaluation {
  Eigen::MatrixXd extensions;
  Eigen::MatrixXd map;
  Eigen::VectorXd residual;
  double objective = 0.0;
};

class Forward {
 public:
  Forward(const InverseProblem& problem, double alpha, Eigen::VectorXd theta0)
      : problem_(problem), alpha_(alpha), theta0_(std::move(theta0)) {}

  Evaluation evaluate(const Eigen::VectorXd& theta, double lambda) const {
    const auto gamma = PiecewiseLinearConductivity::from_coefficients(theta, lambda);
    const FemSystem sys = FemSystem::assemble(problem_.mesh, gamma);
    Evaluation e;
    e.extensions = harmonic_extensions(sys);
    if (problem_.num_patterns > 0) {
      e.extensions = e.extensions * boundary_patterns(*problem_.mesh, problem_.num_patterns);
    }
    e.map = e.extensions.transpose() * (sys.stiffness() * e.extensions);
    e.map = 0.5 * (e.map + e.map.transpose());
    e.residual = vec_sym(e.map - problem_.measured);
    e.objective = e.residual.squaredNorm() + alpha_ * (theta - theta0_).squaredNorm();
    return e;
  }

  Eigen::MatrixXd jacobian(const Eigen::VectorXd& theta, double lambda,
                           const Eigen::MatrixXd& extensions) const {
    const auto gamma = PiecewiseLinearConductivity::from_coefficients(theta, lambda);
    const FemSystem sys = FemSystem::assemble(problem_.mesh, gamma);
    const int p = static_cast<int>(theta.size());
    const int n = static_cast<int>(extensions.cols());
    Eigen::MatrixXd j(n * (n + 1) / 2, p);
    for (int k = 0; k < p; ++k) {
      Eigen::VectorXd e = Eigen::VectorXd::Zero(p);
      e[k] = 1.0;
      j.col(k) = vec_sym(frechet_derivative(sys, extensions, e));
    }
    return j;
  }

 private:
  const InverseProblem& problem_;
  double alpha_;
  Eigen::VectorXd theta0_;
};

}  // namespace

Eigen::MatrixXd frechet_derivative(const FemSystem& system, const Eigen::MatrixXd& extensions,
                                   const Eigen::VectorXd& direction) {
  if (direction.size() != 3 * system.gamma().num_pieces()) {
    throw PreconditionError("direction must have three coefficients per subdomain");
  }
  if (direction.cwiseAbs().maxCoeff() == 0.0) {
    return Eigen::MatrixXd::Zero(extensions.cols(), extensions.cols());
  }
  const auto dgamma = PiecewiseLinearConductivity::from_coefficients(direction, 1.0);
  const SparseMatrix k = assemble_stiffness(system.mesh(), dgamma);
  Eigen::MatrixXd d = extensions.transpose() * (k * extensions);
  return 0.5 * (d + d.transpose());
}

Eigen::MatrixXd frechet_derivative(const FemSystem& system, const Eigen::VectorXd& direction) {
  return frechet_derivative(system, harmonic_extensions(system), direction);
}

Eigen::MatrixXd boundary_patterns(const Mesh& mesh, int count) {
  if (count < 1) throw PreconditionError("pattern count must be positive");
  const SigmaPath path = sigma_path(mesh);
  std::vector<double> s{0.0};
  const std::size_t n = path.nodes.size();
  for (std::size_t i = 1; i <= n; ++i) {
    if (i == n && !path.closed) break;
    const Vec2& a = mesh.vertices[path.nodes[i - 1]];
    const Vec2& b = mesh.vertices[path.nodes[i % n]];
    s.push_back(s.back() + (b - a).norm());
  }
  const double length = s.back();
  const std::vector<int> data = path.interior();
  const std::size_t offset = path.closed ? 0 : 1;
  if (static_cast<int>(data.size()) < count) {
    throw PreconditionError("more patterns than Sigma data nodes");
  }
  Eigen::MatrixXd b(data.size(), count);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double t = s[i + offset] / length;
    for (int k = 0; k < count; ++k) {
      if (path.closed) {
        const int j = k / 2 + 1;
        b(i, k) = k % 2 == 0 ? std::cos(2.0 * std::numbers::pi * j * t)
                             : std::sin(2.0 * std::numbers::pi * j * t);
      } else {
        b(i, k) = std::sin((k + 1) * std::numbers::pi * t);
      }
    }
  }
  return b;
}

Eigen::MatrixXd synthetic_data(const Mesh& mesh, const PiecewiseLinearConductivity& truth,
                               DataMode mode, int num_patterns) {
  if (mode == DataMode::kSameMesh) {
    const Eigen::MatrixXd map = assemble_dton(FemSystem::assemble(mesh, truth)).matrix;
    if (num_patterns == 0) return map;
    const Eigen::MatrixXd b = boundary_patterns(mesh, num_patterns);
    return b.transpose() * map * b;
  }
  const RefinedMesh fine = refine_uniform(mesh);
  const auto fine_ptr = std::make_shared<const Mesh>(fine.mesh);
  const FemSystem fine_sys = FemSystem::assemble(fine_ptr, truth);
  const Eigen::MatrixXd fine_map = assemble_dton(fine_sys).matrix;
  if (num_patterns > 0) {
    const Eigen::MatrixXd b = boundary_patterns(fine.mesh, num_patterns);
    Eigen::MatrixXd out = b.transpose() * fine_map * b;
    return 0.5 * (out + out.transpose());
  }
  const std::vector<int> coarse_nodes = sigma_path(mesh).interior();
  std::vector<int> coarse_index(mesh.num_vertices(), -1);
  for (std::size_t i = 0; i < coarse_nodes.size(); ++i) {
    coarse_index[coarse_nodes[i]] = static_cast<int>(i);
  }
  const auto& fine_nodes = fine_sys.sigma_nodes();
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(fine_nodes.size(), coarse_nodes.size());
  for (std::size_t f = 0; f < fine_nodes.size(); ++f) {
    const auto [a, b] = fine.parents[fine_nodes[f]];
    if (a == b) {
      if (coarse_index[a] >= 0) p(f, coarse_index[a]) = 1.0;
      continue;
    }
    if (coarse_index[a] >= 0) p(f, coarse_index[a]) += 0.5;
    if (coarse_index[b] >= 0) p(f, coarse_index[b]) += 0.5;
  }
  Eigen::MatrixXd out = p.transpose() * fine_map * p;
  return 0.5 * (out + out.transpose());
}

double relative_coefficient_error(const PiecewiseLinearConductivity& estimate,
                                  const PiecewiseLinearConductivity& truth) {
  const Eigen::VectorXd t = truth.coefficients();
  return (estimate.coefficients() - t).norm() / t.norm();
}

PiecewiseLinearConductivity project_admissible(const PiecewiseLinearConductivity& gamma,
                                               const DomainPartition& partition) {
  const double lambda = gamma.lambda();
  const double lo = 1.0 / lambda;
  std::vector<AffinePiece> pieces = gamma.pieces();
  for (int id = 1; id <= partition.num_subdomains(); ++id) {
    AffinePiece& piece = pieces[id - 1];
    const auto& poly = partition.subdomain(id);
    Vec2 c = Vec2::Zero();
    for (const Vec2& v : poly) c += v;
    c /= static_cast<double>(poly.size());
    const double m = std::clamp(piece(c), lo, lambda);
    double s = 1.0;
    for (const Vec2& v : poly) {
      const double d = piece.A.dot(v - c);
      if (d > 0.0) s = std::min(s, (lambda - m) / d);
      if (d < 0.0) s = std::min(s, (lo - m) / d);
    }
    s = std::max(0.0, s);
    if (s < 1.0 || m != piece(c)) {
      s *= 1.0 - 1e-12;
      piece.A *= s;
      piece.a = m - piece.A.dot(c);
    }
  }
  PiecewiseLinearConductivity out(std::move(pieces), lambda);
  out.require_admissible(partition);
  return out;
}

Eigen::MatrixXd data_metric(const InverseProblem& problem) {
  const Eigen::MatrixXd theta = fractional_metric(*problem.mesh);
  if (problem.num_patterns == 0) return theta;
  const Eigen::MatrixXd b = boundary_patterns(*problem.mesh, problem.num_patterns);
  return b.transpose() * theta * b;
}

InversionResult gauss_newton(const InverseProblem& problem, const GaussNewtonOptions& options) {
  if (!problem.mesh) throw PreconditionError("inverse problem needs a mesh");
  problem.initial.require_admissible(problem.partition);
  const double lambda = problem.initial.lambda();
  const double alpha = problem.regularization;
  const Eigen::VectorXd theta0 = problem.initial.coefficients();
  const int p = static_cast<int>(theta0.size());
  const Forward forward(problem, alpha, theta0);
  const Eigen::MatrixXd theta_metric = data_metric(problem);

  InversionResult result;
  IterationTrace& trace = result.trace;
  Eigen::VectorXd theta = theta0;
  Evaluation current = forward.evaluate(theta, lambda);
  if (current.map.rows() != problem.measured.rows() ||
      current.map.cols() != problem.measured.cols()) {
    throw PreconditionError("measured map does not match the Sigma nodes of the mesh");
  }
  auto record = [&](double step) {
    IterationRecord r;
    r.iteration = trace.steps;
    r.coefficients = theta;
    r.misfit_frobenius = (current.map - problem.measured).norm();
    r.misfit_operator = operator_norm(current.map - problem.measured, theta_metric);
    r.step_norm = step;
    if (problem.truth) {
      r.error = relative_coefficient_error(PiecewiseLinearConductivity::from_coefficients(theta, lambda),
                                           *problem.truth);
    }
    trace.records.push_back(std::move(r));
  };
  record(0.0);

  double mu = 0.0;
  int failures = 0;
  Eigen::MatrixXd jac = forward.jacobian(theta, lambda, current.extensions);
  while (true) {
    const Eigen::VectorXd grad =
        2.0 * (jac.transpose() * current.residual + alpha * (theta - theta0));
    Eigen::MatrixXd a(jac.rows() + 2 * p, p);
    Eigen::VectorXd rhs(jac.rows() + 2 * p);
    a.topRows(jac.rows()) = jac;
    a.middleRows(jac.rows(), p) = std::sqrt(alpha) * Eigen::MatrixXd::Identity(p, p);
    a.bottomRows(p) = std::sqrt(mu) * Eigen::MatrixXd::Identity(p, p);
    rhs.head(jac.rows()) = -current.residual;
    rhs.segment(jac.rows(), p) = -std::sqrt(alpha) * (theta - theta0);
    rhs.tail(p).setZero();
    const Eigen::VectorXd delta = a.colPivHouseholderQr().solve(rhs);

    if (delta.norm() <= options.tol * std::max(1.0, theta.norm())) {
      trace.converged = true;
      break;
    }
    if (trace.steps >= options.max_iters) break;

    const double slope = grad.dot(delta);
    bool accepted = false;
    if (slope < 0.0) {
      double t = 1.0;
      for (int h = 0; h <= options.max_halvings; ++h, t *= 0.5) {
        const Eigen::VectorXd trial = theta + t * delta;
        if (!positive(PiecewiseLinearConductivity::from_coefficients(trial, lambda),
                      problem.partition)) {
          continue;
        }
        Evaluation next = forward.evaluate(trial, lambda);
        if (next.objective <= current.objective + options.armijo * t * slope) {
          theta = trial;
          current = std::move(next);
          ++trace.steps;
          record(t * delta.norm());
          accepted = true;
          break;
        }
      }
    }
    if (accepted) {
      failures = 0;
      mu = mu > 1e-14 ? mu / 10.0 : 0.0;
      jac = forward.jacobian(theta, lambda, current.extensions);
      continue;
    }
    if (++failures >= options.max_failures) {
      throw DivergenceError("line search failed " + std::to_string(failures) +
                            " consecutive times");
    }
    const double base = jac.squaredNorm() / p + alpha;
    mu = mu == 0.0 ? 1e-4 * base : 10.0 * mu;
  }
  result.gamma = project_admissible(PiecewiseLinearConductivity::from_coefficients(theta, lambda),
                                    problem.partition);
  return result;
}

ConvergenceStudy radius_of_convergence_study(const DomainPartition& partition, double lambda,
                                             const std::vector<double>& scales,
                                             std::uint64_t seed,
                                             const ConvergenceOptions& options) {
  for (std::size_t i = 0; i < scales.size(); ++i) {
    if (!(scales[i] > 0.0) || (i > 0 && !(scales[i] > scales[i - 1]))) {
      throw PreconditionError("scales must be positive and increasing");
    }
  }
  InverseProblem problem{partition, std::make_shared<const Mesh>(triangulate(partition, options.h)),
                         {}, 0.0, 0.0, {}, {}};
  const PiecewiseLinearConductivity truth = random_admissible(partition, lambda, seed);
  problem.truth = truth;
  problem.measured = synthetic_data(*problem.mesh, truth, DataMode::kSameMesh);
  const Eigen::VectorXd theta = truth.coefficients();

  ConvergenceStudy study;
  bool intact = true;
  for (std::size_t s = 0; s < scales.size(); ++s) {
    ConvergenceRow row;
    row.scale = scales[s];
    for (int trial = 0; trial < options.trials; ++trial) {
      ++row.trials;
      std::mt19937_64 rng(seed * 7919ULL + s * 104729ULL + static_cast<std::uint64_t>(trial));
      std::uniform_real_distribution<double> xi(-1.0, 1.0);
      Eigen::VectorXd start = theta;
      for (int k = 0; k < start.size(); ++k) start[k] *= 1.0 + scales[s] * xi(rng);
      const auto initial = PiecewiseLinearConductivity::from_coefficients(start, lambda);
      if (!initial.is_admissible(partition)) {
        ++row.skipped;
        continue;
      }
      problem.initial = initial;
      try {
        const auto result = gauss_newton(problem, options.gauss_newton);
        if (relative_coefficient_error(result.gamma, truth) < options.success_error) ++row.converged;
      } catch (const DivergenceError&) {
      }
    }
    const int attempted = row.trials - row.skipped;
    row.fraction = attempted > 0 ? static_cast<double>(row.converged) / attempted : 0.0;
    if (intact && attempted > 0 && row.converged == attempted) {
      study.radius = row.scale;
    } else if (attempted > 0) {
      intact = false;
    }
    study.rows.push_back(row);
  }
  return study;
}

NoiseStudy noise_robustness(const InverseProblem& problem, const std::vector<double>& levels,
                            std::uint64_t seed, const GaussNewtonOptions& options) {
  if (!problem.truth) throw PreconditionError("noise study needs the true conductivity");
  const Eigen::MatrixXd theta = data_metric(problem);
  InverseProblem noisy = problem;
  if (!(noisy.regularization > 0.0)) {
    const double w = 1e-3 * problem.measured.norm();
    noisy.regularization = w * w;
  }
  auto solve_error = [&](const InverseProblem& pr, bool& ok) {
    try {
      const auto result = gauss_newton(pr, options);
      ok = true;
      return sup_norm(result.gamma, *problem.truth, problem.partition);
    } catch (const DivergenceError&) {
      ok = false;
      return std::numeric_limits<double>::quiet_NaN();
    }
  };

  NoiseStudy study;
  {
    const Eigen::MatrixXd start = synthetic_data(*problem.mesh, problem.initial,
                                                 DataMode::kSameMesh, problem.num_patterns);
    study.signal_gap = operator_norm(start - problem.measured, theta);
  }
  bool ok = true;
  study.baseline = solve_error(noisy, ok);
  const int n = static_cast<int>(problem.measured.rows());
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < levels.size(); ++i) {
    NoiseRow row;
    row.noise = levels[i];
    noisy.measured = problem.measured;
    noisy.noise_level = levels[i];
    if (levels[i] > 0.0) {
      std::mt19937_64 rng(seed * 6364136223846793005ULL + i);
      std::normal_distribution<double> normal;
      Eigen::MatrixXd e(n, n);
      for (int r = 0; r < n; ++r) {
        for (int c = 0; c < n; ++c) e(r, c) = normal(rng);
      }
      e = 0.5 * (e + e.transpose());
      e *= levels[i] / operator_norm(e, theta);
      noisy.measured += e;
    }
    row.error = solve_error(noisy, ok);
    row.informative = ok && levels[i] < study.signal_gap;
    if (row.informative && levels[i] > 0.0) {
      num += levels[i] * (row.error - study.baseline);
      den += levels[i] * levels[i];
    }
    study.rows.push_back(row);
  }
  study.slope = den > 0.0 ? num / den : 0.0;
  return study;
}

void write_trace(std::ostream& out, const IterationTrace& trace) {
  out << "iteration\tmisfit_frobenius\tmisfit_operator\tstep_norm\terror";
  const int p = trace.records.empty() ? 0 : static_cast<int>(trace.records[0].coefficients.size());
  for (int k = 0; k < p; ++k) out << "\tc" << k;
  out << '\n' << std::setprecision(17);
  for (const auto& r : trace.records) {
    out << r.iteration << '\t' << r.misfit_frobenius << '\t' << r.misfit_operator << '\t'
        << r.step_norm << '\t' << r.error;
    for (int k = 0; k < p; ++k) out << '\t' << r.coefficients[k];
    out << '\n';
  }
}

}  // namespace calderon
