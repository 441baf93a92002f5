#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "calderon/conductivity.hpp"
#include "calderon/fem.hpp"
#include "calderon/geometry.hpp"
#include "calderon/mesh.hpp"

namespace calderon {

/// Derivative of the local DtoN map in the coefficient direction `direction`
/// (layout of PiecewiseLinearConductivity::coefficients): U^T K(dgamma) U with
/// U the harmonic extensions of the Sigma hat functions.
Eigen::MatrixXd frechet_derivative(const FemSystem& system, const Eigen::VectorXd& direction);
/// Same with precomputed extensions.
Eigen::MatrixXd frechet_derivative(const FemSystem& system, const Eigen::MatrixXd& extensions,
                                   const Eigen::VectorXd& direction);

enum class DataMode {
  kSameMesh,  // data on the inversion mesh (exact-identity tests)
  kRefined,   // data on the uniformly refined mesh, projected back
};

/// Smooth boundary patterns sampled at the Sigma data nodes of `mesh`, one
/// column each: sin(k pi s / |Sigma|), k = 1..count, on an open Sigma, and
/// cos / sin (2 pi j s / |Sigma|) pairs on a closed one (s = arclength).
Eigen::MatrixXd boundary_patterns(const Mesh& mesh, int count);

/// Local DtoN map of `truth` as seen from `mesh`. With num_patterns = 0 the
/// result lives on the Sigma nodes (hat-function data); refined mode then
/// restricts the fine map through linear interpolation, P^T Lambda_fine P.
/// With num_patterns > 0 the result is B^T Lambda B for the smooth patterns
/// sampled on the mesh that produces the data.
Eigen::MatrixXd synthetic_data(const Mesh& mesh, const PiecewiseLinearConductivity& truth,
                               DataMode mode, int num_patterns = 0);

struct InverseProblem {
  DomainPartition partition;
  std::shared_ptr<const Mesh> mesh;
  Eigen::MatrixXd measured;
  double noise_level = 0.0;     // operator-norm units
  double regularization = 0.0;  // alpha in alpha |theta - theta_0|^2
  PiecewiseLinearConductivity initial;
  std::optional<PiecewiseLinearConductivity> truth;
  int num_patterns = 0;  // 0: data on the Sigma nodes; else pattern count
};

/// Gram matrix in which misfits and noise are measured: the fractional
/// metric, restricted to the pattern span when patterns are used.
Eigen::MatrixXd data_metric(const InverseProblem& problem);

struct IterationRecord {
  int iteration = 0;
  Eigen::VectorXd coefficients;
  double misfit_frobenius = 0.0;
  double misfit_operator = 0.0;
  double step_norm = 0.0;
  double error = -1.0;  // relative coefficient error, -1 without a truth
};

struct IterationTrace {
  std::vector<IterationRecord> records;
  int steps = 0;  // accepted steps
  bool converged = false;
};

struct GaussNewtonOptions {
  int max_iters = 25;
  double tol = 1e-10;  // on |step| / max(1, |theta|)
  double armijo = 1e-4;
  int max_halvings = 30;
  int max_failures = 5;
};

struct InversionResult {
  PiecewiseLinearConductivity gamma;
  IterationTrace trace;
};

/// Damped Gauss-Newton on the coefficient vector. Throws DivergenceError
/// after `max_failures` consecutive failed line searches.
InversionResult gauss_newton(const InverseProblem& problem, const GaussNewtonOptions& options = {});

/// |theta - theta_true| / |theta_true|.
double relative_coefficient_error(const PiecewiseLinearConductivity& estimate,
                                  const PiecewiseLinearConductivity& truth);

/// Pieces shrunk toward their clamped centroid values until admissible.
PiecewiseLinearConductivity project_admissible(const PiecewiseLinearConductivity& gamma,
                                               const DomainPartition& partition);

struct ConvergenceRow {
  double scale = 0.0;
  int trials = 0;
  int skipped = 0;  // inadmissible starting models
  int converged = 0;
  double fraction = 0.0;  // converged / (trials - skipped), 0 when all skipped
};

struct ConvergenceStudy {
  std::vector<ConvergenceRow> rows;
  double radius = 0.0;  // largest scale before the first row below fraction 1
};

struct ConvergenceOptions {
  double h = 0.1;
  int trials = 4;
  double success_error = 1e-4;
  GaussNewtonOptions gauss_newton;
};

ConvergenceStudy radius_of_convergence_study(const DomainPartition& partition, double lambda,
                                             const std::vector<double>& scales,
                                             std::uint64_t seed,
                                             const ConvergenceOptions& options = {});

struct NoiseRow {
  double noise = 0.0;  // |E|_*
  double error = 0.0;  // |gamma_hat - gamma_true|_inf
  bool informative = true;
};

struct NoiseStudy {
  std::vector<NoiseRow> rows;
  double baseline = 0.0;  // error at zero noise
  double slope = 0.0;     // least-squares slope of (error - baseline) against noise
  double signal_gap = 0.0;
};

/// Requires problem.truth. Noise matrices are symmetrised Gaussian matrices
/// scaled to the requested dual operator norm.
NoiseStudy noise_robustness(const InverseProblem& problem, const std::vector<double>& levels,
                            std::uint64_t seed, const GaussNewtonOptions& options = {});

void write_trace(std::ostream& out, const IterationTrace& trace);

}  // namespace calderon
