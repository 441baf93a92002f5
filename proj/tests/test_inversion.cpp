#include <doctest.h>

#include <cmath>
#include <sstream>

#include "calderon/errors.hpp"
#include "calderon/inversion.hpp"
#include "calderon/maps.hpp"
#include "fixtures.hpp"

using namespace calderon;

namespace {

const PiecewiseLinearConductivity kTruth({{2.0, Vec2(0.3, -0.4)}, {0.8, Vec2(-0.2, 0.3)}}, 4.0);

Eigen::VectorXd perturbed(const Eigen::VectorXd& theta, double scale) {
  Eigen::VectorXd out = theta;
  for (int k = 0; k < out.size(); ++k) out[k] *= 1.0 + (k % 2 == 0 ? -scale : scale);
  return out;
}

PartitionSpec three_blocks(bool swap) {
  PartitionSpec spec;
  spec.vertices = {{0, 0}, {0.5, 0}, {1, 0}, {1, 0.5}, {1, 1}, {0, 1}, {0, 0.5}, {0.5, 0.5}};
  spec.outer = {0, 1, 2, 3, 4, 5, 6};
  spec.sigma_edges = {4};
  spec.subdomains = {{6, 7, 3, 4, 5}, {0, 1, 7, 6}, {1, 2, 3, 7}};
  if (swap) std::swap(spec.subdomains[1], spec.subdomains[2]);
  spec.r0 = 0.4;
  spec.enforce_apriori = false;
  return spec;
}

}  // namespace

TEST_CASE("Frechet derivative basics") {
  const auto p = DomainPartition::build(fixtures::two_layer());
  const Mesh mesh = triangulate(p, 0.1);
  const auto sys = FemSystem::assemble(mesh, kTruth);
  const Eigen::MatrixXd u = harmonic_extensions(sys);
  const Eigen::MatrixXd zero = frechet_derivative(sys, u, Eigen::VectorXd::Zero(6));
  CHECK(zero.cwiseAbs().maxCoeff() == 0.0);

  // The map itself is the derivative in the direction gamma (homogeneity).
  const Eigen::MatrixXd self = frechet_derivative(sys, u, kTruth.coefficients());
  const Eigen::MatrixXd map = assemble_dton(sys).matrix;
  CHECK((self - map).cwiseAbs().maxCoeff() <= 1e-10 * map.cwiseAbs().maxCoeff());

  // Locality: a direction on D_2 only equals the integral restricted to D_2.
  Eigen::VectorXd dir = Eigen::VectorXd::Zero(6);
  dir << 0.0, 0.0, 0.0, 0.7, -0.3, 0.2;
  const Eigen::MatrixXd local = frechet_derivative(sys, u, dir);
  std::vector<bool> keep(mesh.num_triangles());
  for (int t = 0; t < mesh.num_triangles(); ++t) keep[t] = mesh.triangle_subdomain[t] == 2;
  Eigen::VectorXd full = dir;
  full.head(3) << 5.0, 1.0, 1.0;  // ignored outside the mask
  const SparseMatrix k = assemble_stiffness(mesh, PiecewiseLinearConductivity::from_coefficients(full, 1.0), keep);
  const Eigen::MatrixXd restricted = u.transpose() * (k * u);
  CHECK((local - restricted).cwiseAbs().maxCoeff() <= 1e-12 * restricted.cwiseAbs().maxCoeff());
}

TEST_CASE("Frechet derivative against finite differences") {
  const auto p = DomainPartition::build(fixtures::two_layer());
  const auto mesh = std::make_shared<const Mesh>(triangulate(p, 0.1));
  const auto sys = FemSystem::assemble(mesh, kTruth);
  Eigen::VectorXd dir(6);
  dir << 0.4, -0.2, 0.1, -0.3, 0.2, 0.5;
  const Eigen::MatrixXd d = frechet_derivative(sys, dir);
  const Eigen::MatrixXd base = assemble_dton(sys).matrix;
  std::vector<double> errors;
  for (double s : {1e-2, 1e-3, 1e-4}) {
    const auto g = PiecewiseLinearConductivity::from_coefficients(kTruth.coefficients() + s * dir, 4.0);
    const Eigen::MatrixXd moved = assemble_dton(FemSystem::assemble(mesh, g)).matrix;
    errors.push_back(((moved - base) / s - d).cwiseAbs().maxCoeff());
  }
  for (int i = 1; i < 3; ++i) CHECK(std::log10(errors[i - 1] / errors[i]) >= 0.9);
}

TEST_CASE("Gauss-Newton from the truth takes no step") {
  const auto p = DomainPartition::build(fixtures::two_layer());
  const auto mesh = std::make_shared<const Mesh>(triangulate(p, 0.1));
  InverseProblem problem{p, mesh, synthetic_data(*mesh, kTruth, DataMode::kSameMesh), 0.0, 0.0,
                         kTruth, kTruth};
  const auto result = gauss_newton(problem);
  CHECK(result.trace.converged);
  CHECK(result.trace.steps == 0);
  CHECK(result.trace.records.size() == 1);
}

TEST_CASE("two-layer reconstruction on the data mesh") {
  const auto p = DomainPartition::build(fixtures::two_layer());
  const auto mesh = std::make_shared<const Mesh>(triangulate(p, 0.1));
  const auto start = PiecewiseLinearConductivity::from_coefficients(perturbed(kTruth.coefficients(), 0.05), 4.0);
  for (int patterns : {0, 8}) {
    InverseProblem problem{p, mesh, synthetic_data(*mesh, kTruth, DataMode::kSameMesh, patterns),
                           0.0, 0.0, start, kTruth, patterns};
    const auto result = gauss_newton(problem);
    CHECK(result.trace.converged);
    CHECK(result.trace.steps <= 25);
    CHECK(relative_coefficient_error(result.gamma, kTruth) <= 1e-6);
    for (std::size_t i = 1; i < result.trace.records.size(); ++i) {
      CHECK(result.trace.records[i].misfit_frobenius <= result.trace.records[i - 1].misfit_frobenius);
    }
  }
}

TEST_CASE("mismatched data dimensions are rejected") {
  const auto p = DomainPartition::build(fixtures::two_layer());
  const auto mesh = std::make_shared<const Mesh>(triangulate(p, 0.1));
  InverseProblem problem{p, mesh, Eigen::MatrixXd::Identity(3, 3), 0.0, 0.0, kTruth, kTruth};
  CHECK_THROWS_AS(gauss_newton(problem), PreconditionError);
}

TEST_CASE("refined data approaches the coarse model as h decreases") {
  const auto p = DomainPartition::build(fixtures::two_layer());
  std::vector<double> gaps;
  for (double h : {0.1, 0.05}) {
    const Mesh mesh = triangulate(p, h);
    const Eigen::MatrixXd coarse = synthetic_data(mesh, kTruth, DataMode::kSameMesh, 4);
    const Eigen::MatrixXd fine = synthetic_data(mesh, kTruth, DataMode::kRefined, 4);
    gaps.push_back((coarse - fine).norm() / coarse.norm());
  }
  CHECK(gaps[1] < gaps[0] / 2.5);
  // Hat-function data: P^T Lambda_fine P is dominated by the finer resolution
  // of each hat and stays far from the coarse map.
  const Mesh mesh = triangulate(p, 0.1);
  const Eigen::MatrixXd coarse = synthetic_data(mesh, kTruth, DataMode::kSameMesh);
  const Eigen::MatrixXd fine = synthetic_data(mesh, kTruth, DataMode::kRefined);
  CHECK(coarse.rows() == fine.rows());
  CHECK((fine - fine.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * fine.norm());
}

TEST_CASE("boundary patterns") {
  const auto p = DomainPartition::build(fixtures::unit_square());
  const Mesh mesh = triangulate(p, 0.1);
  const Eigen::MatrixXd b = boundary_patterns(mesh, 3);
  CHECK(b.rows() == static_cast<int>(sigma_path(mesh).interior().size()));
  CHECK(b.cwiseAbs().maxCoeff() <= 1.0);
  CHECK_THROWS_AS(boundary_patterns(mesh, 0), PreconditionError);
}

TEST_CASE("projection onto the admissible set") {
  const auto p = DomainPartition::build(fixtures::two_layer());
  CHECK((project_admissible(kTruth, p).coefficients() - kTruth.coefficients()).norm() == 0.0);
  const PiecewiseLinearConductivity steep({{2.0, Vec2(0.0, 8.0)}, {-1.0, Vec2::Zero()}}, 4.0);
  const auto fixed = project_admissible(steep, p);
  CHECK(fixed.is_admissible(p));
  CHECK(fixed.piece(2).a == doctest::Approx(0.25));
}

TEST_CASE("relabelled subdomains give relabelled coefficients") {
  const PiecewiseLinearConductivity truth(
      {{1.5, Vec2(0.1, 0.2)}, {0.7, Vec2(0.2, -0.1)}, {2.5, Vec2(-0.3, 0.1)}}, 4.0);
  const PiecewiseLinearConductivity swapped({truth.piece(1), truth.piece(3), truth.piece(2)}, 4.0);
  std::vector<Eigen::VectorXd> recovered;
  for (bool swap : {false, true}) {
    const auto p = DomainPartition::build(three_blocks(swap));
    const auto mesh = std::make_shared<const Mesh>(triangulate(p, 0.1));
    const auto& t = swap ? swapped : truth;
    const auto start = PiecewiseLinearConductivity::from_coefficients(perturbed(t.coefficients(), 0.03), 4.0);
    InverseProblem problem{p, mesh, synthetic_data(*mesh, t, DataMode::kSameMesh), 0.0, 0.0, start, t};
    recovered.push_back(gauss_newton(problem).gamma.coefficients());
  }
  CHECK((recovered[0].segment(0, 3) - recovered[1].segment(0, 3)).norm() <= 1e-6);
  CHECK((recovered[0].segment(3, 3) - recovered[1].segment(6, 3)).norm() <= 1e-6);
  CHECK((recovered[0].segment(6, 3) - recovered[1].segment(3, 3)).norm() <= 1e-6);
}

TEST_CASE("radius of convergence shrinks with depth") {
  ConvergenceOptions options;
  options.h = 0.1;
  options.trials = 4;
  const std::vector<double> scales{1e-3, 0.03, 0.1, 0.3, 1.0, 100.0};
  const auto two = radius_of_convergence_study(
      DomainPartition::build(fixtures::layered_spec_for_tests(2)), 4.0, scales, 1, options);
  const auto four = radius_of_convergence_study(
      DomainPartition::build(fixtures::layered_spec_for_tests(4)), 4.0, scales, 1, options);
  CHECK(two.rows.front().fraction == 1.0);
  CHECK(four.rows.front().fraction == 1.0);
  CHECK(two.rows.back().skipped == two.rows.back().trials);
  CHECK(four.radius <= two.radius);
  CHECK_THROWS_AS(radius_of_convergence_study(DomainPartition::build(fixtures::two_layer()), 4.0,
                                              {0.2, 0.1}, 1, options),
                  PreconditionError);
}

TEST_CASE("noise robustness table") {
  const auto p = DomainPartition::build(fixtures::two_layer());
  const auto mesh = std::make_shared<const Mesh>(triangulate(p, 0.1));
  const auto start = PiecewiseLinearConductivity::from_coefficients(perturbed(kTruth.coefficients(), 0.05), 4.0);
  InverseProblem problem{p, mesh, synthetic_data(*mesh, kTruth, DataMode::kSameMesh), 0.0, 0.0,
                         start, kTruth};
  const auto study = noise_robustness(problem, {0.0, 1e-3, 1e3}, 3);
  REQUIRE(study.rows.size() == 3);
  CHECK(study.rows[0].error == study.baseline);
  CHECK(study.rows[0].informative);
  CHECK_FALSE(study.rows[2].informative);
  CHECK(std::isfinite(study.slope));
  InverseProblem no_truth = problem;
  no_truth.truth.reset();
  CHECK_THROWS_AS(noise_robustness(no_truth, {0.0}, 1), PreconditionError);
}

TEST_CASE("trace table") {
  IterationTrace trace;
  IterationRecord r;
  r.coefficients = Eigen::VectorXd::Ones(3);
  trace.records.push_back(r);
  std::ostringstream out;
  write_trace(out, trace);
  CHECK(out.str().rfind("iteration\tmisfit_frobenius\tmisfit_operator\tstep_norm\terror\tc0\tc1\tc2\n", 0) == 0);
}
