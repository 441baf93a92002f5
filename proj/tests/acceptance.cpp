// Acceptance run: one PASS/FAIL line per criterion. Exit status counts the
// failures outside the --allow-fail list.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include <Eigen/Dense>

#include "calderon/errors.hpp"
#include "calderon/greens.hpp"
#include "calderon/inversion.hpp"
#include "calderon/maps.hpp"
#include "calderon/runner.hpp"
#include "calderon/stability.hpp"
#include "calderon/survey.hpp"
#include "fixtures.hpp"

using namespace calderon;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [violated: " << what << "]";
    }
  }
};

template <typename... Args>
std::string fmt(const char* f, Args... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// --- 1: image kernel -------------------------------------------------------

template <int Dim>
void kernel_checks(Outcome& o, double& worst_jump, double& worst_flux) {
  std::mt19937_64 rng(100 + Dim);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (double a : {0.1, 0.5, 1.0, 2.0, 10.0}) {
    const TwoPhaseKernel<Dim> k(a);
    for (int trial = 0; trial < 50; ++trial) {
      Point<Dim> x, y;
      for (int i = 0; i < Dim; ++i) {
        x[i] = u(rng);
        y[i] = u(rng);
      }
      x[Dim - 1] = 0.0;
      // Source below, then above the interface: both image branches.
      for (double side : {-1.0, 1.0}) {
        y[Dim - 1] = side * (std::abs(y[Dim - 1]) + 0.1);
        Point<Dim> up = x;
        up[Dim - 1] = 1e-300;
        const double below = k.value(x, y), above = k.value(up, y);
        worst_jump = std::max(worst_jump, std::abs(above - below) / (std::abs(below) + 1e-300));
        const double flux_up = a * k.gradient_x(up, y)[Dim - 1];
        const double flux_down = k.gradient_x(x, y)[Dim - 1];
        worst_flux = std::max(worst_flux, std::abs(flux_up - flux_down) / (1.0 + std::abs(flux_down)));
      }
    }
  }
  const TwoPhaseKernel<Dim> unit(1.0);
  for (int trial = 0; trial < 50; ++trial) {
    Point<Dim> x, y;
    for (int i = 0; i < Dim; ++i) {
      x[i] = u(rng);
      y[i] = u(rng);
    }
    o.require(unit.value(x, y) == gamma_kernel<Dim>(x, y), "a+ = 1 equals Gamma exactly");
  }
}

void criterion_1(Outcome& o) {
  double jump = 0.0, flux = 0.0;
  kernel_checks<2>(o, jump, flux);
  kernel_checks<3>(o, jump, flux);
  o.detail << fmt("max rel jump %.2e, max flux mismatch %.2e, a+=1 exact", jump, flux);
  o.require(jump <= 1e-10, "continuity 1e-10");
  o.require(flux <= 1e-10, "flux continuity 1e-10");
}

// --- 2: FEM ------------------------------------------------------------------

double l2_norm(const Mesh& mesh, const Field& e) {
  double sum = 0.0;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles[t];
    const double a = e[tri[0]], b = e[tri[1]], c = e[tri[2]];
    sum += mesh.area(t) / 6.0 * (a * a + b * b + c * c + a * b + b * c + a * c);
  }
  return std::sqrt(sum);
}

void criterion_2(Outcome& o) {
  const auto disk = DomainPartition::build(fixtures::disk(1.0, 40, 0.5));
  Mesh mesh = triangulate(disk, 0.3);
  std::vector<double> hs, errors;
  for (int level = 0; level < 4; ++level) {
    const auto sys = FemSystem::assemble(mesh, PiecewiseLinearConductivity::constant(1, 1.0, 4.0));
    Field exact(mesh.num_vertices());
    for (int v = 0; v < mesh.num_vertices(); ++v) {
      exact[v] = std::exp(mesh.vertices[v].x()) * std::cos(mesh.vertices[v].y());
    }
    hs.push_back(mesh.h_max);
    errors.push_back(l2_norm(mesh, sys.solve_dirichlet_full(exact) - exact));
    if (level < 3) mesh = refine_uniform(mesh).mesh;
  }
  double min_slope = 1e300;
  o.detail << "L2 slopes";
  for (int i = 1; i < 4; ++i) {
    const double s = std::log(errors[i - 1] / errors[i]) / std::log(hs[i - 1] / hs[i]);
    min_slope = std::min(min_slope, s);
    o.detail << fmt(" %.3f", s);
  }
  o.require(min_slope >= 1.9, "slope >= 1.9");

  const auto p = DomainPartition::build(fixtures::two_layer());
  const Mesh m2 = triangulate(p, 0.1);
  const PiecewiseLinearConductivity g({{1.0, Vec2::Zero()}, {2.0, Vec2::Zero()}}, 4.0);
  const auto sys = FemSystem::assemble(m2, g);
  auto profile = [](double y) { return y <= 0.5 ? 0.7 * y : 0.35 + 1.4 * (y - 0.5); };
  Field exact(m2.num_vertices());
  for (int v = 0; v < m2.num_vertices(); ++v) exact[v] = profile(m2.vertices[v].y());
  const double err = (sys.solve_dirichlet_full(exact) - exact).cwiseAbs().maxCoeff();
  o.detail << fmt("; transmission max error %.2e", err);
  o.require(err <= 1e-10, "transmission 1e-10");
}

// --- 3: DtoN -----------------------------------------------------------------

void criterion_3(Outcome& o) {
  const auto p = DomainPartition::build(fixtures::two_layer());
  const auto mesh = std::make_shared<const Mesh>(triangulate(p, 0.1));
  const PiecewiseLinearConductivity g1({{2.0, Vec2(0.0, 1.0)}, {0.5, Vec2(0.3, 0.0)}}, 4.0);
  const PiecewiseLinearConductivity g2({{1.5, Vec2(0.2, 0.0)}, {0.8, Vec2(0.0, -0.3)}}, 4.0);
  const auto s1 = FemSystem::assemble(mesh, g1);
  const auto s2 = FemSystem::assemble(mesh, g2);
  o.require(s1.num_dofs() < 2000, "< 2000 dofs");
  const auto l1 = assemble_dton(s1, DtoNMethod::kColumns);
  const auto l2 = assemble_dton(s2, DtoNMethod::kColumns);
  const double scale = l1.matrix.cwiseAbs().maxCoeff();
  const double sym = (l1.matrix - l1.matrix.transpose()).cwiseAbs().maxCoeff() / scale;

  // Dense Schur complement oracle.
  const Eigen::MatrixXd k = Eigen::MatrixXd(s1.stiffness());
  const auto& sn = s1.sigma_nodes();
  const auto& in = s1.interior_nodes();
  Eigen::MatrixXd kss(sn.size(), sn.size()), ksi(sn.size(), in.size()), kii(in.size(), in.size());
  for (std::size_t a = 0; a < sn.size(); ++a) {
    for (std::size_t b = 0; b < sn.size(); ++b) kss(a, b) = k(sn[a], sn[b]);
    for (std::size_t b = 0; b < in.size(); ++b) ksi(a, b) = k(sn[a], in[b]);
  }
  for (std::size_t a = 0; a < in.size(); ++a) {
    for (std::size_t b = 0; b < in.size(); ++b) kii(a, b) = k(in[a], in[b]);
  }
  const Eigen::MatrixXd oracle = kss - ksi * kii.ldlt().solve(ksi.transpose());
  const double schur = (l1.matrix - oracle).cwiseAbs().maxCoeff() / scale;

  // <(L1 - L2) phi, psi> = int (g1 - g2) grad u1 . grad u2 over Omega.
  const Eigen::MatrixXd u1 = harmonic_extensions(s1);
  const Eigen::MatrixXd u2 = harmonic_extensions(s2);
  const Eigen::MatrixXd volume = u1.transpose() * (s1.stiffness() * u2 - s2.stiffness() * u2);
  const Eigen::MatrixXd boundary = l1.matrix - l2.matrix;
  const double ident = (volume - boundary).cwiseAbs().maxCoeff() / boundary.cwiseAbs().maxCoeff();
  o.detail << fmt("%d dofs; symmetry %.2e, Schur %.2e, integral identity %.2e (relative)",
                  s1.num_dofs(), sym, schur, ident);
  o.require(sym <= 1e-10, "symmetry 1e-10");
  o.require(schur <= 1e-10, "Schur 1e-10");
  o.require(ident <= 1e-9, "identity 1e-9");
}

// --- 4: Green's function -------------------------------------------------------

void criterion_4(Outcome& o) {
  const auto p = DomainPartition::build(fixtures::two_layer());
  const Mesh mesh = triangulate(p, 0.05);
  const PiecewiseLinearConductivity g({{2.0, Vec2(0.0, 1.0)}, {0.5, Vec2(0.3, 0.0)}}, 4.0);
  const auto sys = FemSystem::assemble(mesh, g);
  std::vector<int> sources;
  for (int v : sys.interior_nodes()) {
    const Vec2& x = mesh.vertices[v];
    if (x.x() > 0.2 && x.x() < 0.8 && x.y() > 0.2 && x.y() < 0.8 && sources.size() < 8) {
      sources.push_back(v);
    }
  }
  std::vector<Field> fields;
  for (int s : sources) fields.push_back(fem_green(sys, mesh.vertices[s]));
  double asym = 0.0;
  for (std::size_t i = 0; i < sources.size(); ++i) {
    for (std::size_t j = 0; j < sources.size(); ++j) {
      const double a = fields[i][sources[j]], b = fields[j][sources[i]];
      asym = std::max(asym, std::abs(a - b) / std::abs(a));
    }
  }

  const auto disk = DomainPartition::build(fixtures::disk(10.0, 64, 2.0));
  MeshOptions options;
  options.h_target = 1.0;
  options.size_field = [](const Vec2& x) { return std::max(0.005, 0.15 * x.norm()); };
  options.fixed_points = {Vec2::Zero()};
  const Mesh dm = triangulate(disk, options);
  const auto ds = FemSystem::assemble(dm, PiecewiseLinearConductivity::constant(1, 1.0, 4.0));
  const Field gf = fem_green(ds, Vec2::Zero());
  std::vector<double> radii{0.05, 0.1, 0.2}, energies;
  for (double r : radii) {
    double e = 0.0;
    for (int t = 0; t < dm.num_triangles(); ++t) {
      if (dm.centroid(t).norm() >= r) e += dm.area(t) * field_gradient(dm, gf, t).squaredNorm();
    }
    energies.push_back(e);
  }
  const double slope = fit_exponent(radii, energies);
  o.detail << fmt("symmetry %.2e over %zu sources; energy-decay slope %.3f (target 0 +- 0.3)", asym,
                  sources.size(), slope);
  o.require(asym <= 1e-9, "symmetry 1e-9");
  o.require(std::abs(slope) <= 0.3, "slope within 0.3 of 2 - n");
}

// --- 5: asymptotics ------------------------------------------------------------

void criterion_5(Outcome& o) {
  AsymptoticsConfig c;
  c.gamma_minus = 1.0;
  c.gamma_plus = 2.0;
  c.grading = 0.25;
  const AsymptoticsReport r = verify_asymptotics(c);
  const double rel = std::abs(r.fitted_coefficient / r.predicted_coefficient - 1.0);
  o.detail << fmt("%d triangles; coefficient %.5f vs %.5f (%.2f%%); exponents value %.3f, "
                  "gradient %.3f, mixed %.4f",
                  r.num_triangles, r.fitted_coefficient, r.predicted_coefficient, 100 * rel,
                  r.value_exponent, r.gradient_exponent, r.mixed_exponent);
  o.require(rel <= 0.05, "coefficient within 5%");
  o.require(r.value_exponent >= 1.0 - 0.2, "value exponent >= (3 - n) - 0.2");
  // Regression pins (measured 1.005 and -0.0003 on this mesh).
  o.require(std::abs(r.gradient_exponent - 1.0045) <= 0.02, "gradient exponent pinned");
  o.require(std::abs(r.mixed_exponent) <= 0.01, "mixed exponent pinned");

  AsymptoticsConfig affine = c;
  affine.slope_minus = Vec2(0.2, -0.1);
  affine.slope_plus = Vec2(-0.3, 0.2);
  const AsymptoticsReport a = verify_asymptotics(affine);
  const double arel = std::abs(a.fitted_coefficient / a.predicted_coefficient - 1.0);
  o.detail << fmt("; affine slab coefficient %.2f%%, value exponent %.3f", 100 * arel,
                  a.value_exponent);
  o.require(arel <= 0.05, "affine coefficient within 5%");
  o.require(a.value_exponent >= 0.8, "affine value exponent");
}

// --- 6: Frechet derivative -----------------------------------------------------

const PiecewiseLinearConductivity kTruth({{2.0, Vec2(0.3, -0.4)}, {0.8, Vec2(-0.2, 0.3)}}, 4.0);

void criterion_6(Outcome& o) {
  const auto p = DomainPartition::build(fixtures::two_layer());
  const auto mesh = std::make_shared<const Mesh>(triangulate(p, 0.1));
  const auto sys = FemSystem::assemble(mesh, kTruth);
  Eigen::VectorXd dir(6);
  dir << 0.4, -0.2, 0.1, -0.3, 0.2, 0.5;
  const Eigen::MatrixXd d = frechet_derivative(sys, dir);
  const Eigen::MatrixXd base = assemble_dton(sys).matrix;
  std::vector<double> s{1e-2, 1e-3, 1e-4}, errors;
  for (double step : s) {
    const auto g = PiecewiseLinearConductivity::from_coefficients(kTruth.coefficients() + step * dir, 4.0);
    const Eigen::MatrixXd moved = assemble_dton(FemSystem::assemble(mesh, g)).matrix;
    errors.push_back(((moved - base) / step - d).norm());
  }
  const double slope = fit_exponent(s, errors);
  const double zero = frechet_derivative(sys, Eigen::VectorXd::Zero(6)).cwiseAbs().maxCoeff();
  o.detail << fmt("FD remainder slope %.3f; zero direction max %.1e", slope, zero);
  o.require(slope >= 0.9, "slope >= 0.9");
  o.require(zero == 0.0, "zero direction");
}

// --- 7: reconstruction ---------------------------------------------------------

Eigen::VectorXd perturbed(const Eigen::VectorXd& theta, double scale) {
  Eigen::VectorXd out = theta;
  for (int k = 0; k < out.size(); ++k) out[k] *= 1.0 + (k % 2 == 0 ? -scale : scale);
  return out;
}

void criterion_7(Outcome& o) {
  const auto p = DomainPartition::build(fixtures::two_layer());
  const auto mesh = std::make_shared<const Mesh>(triangulate(p, 0.05));
  const auto start =
      PiecewiseLinearConductivity::from_coefficients(perturbed(kTruth.coefficients(), 0.05), 4.0);
  double best = 1e300;
  for (int patterns : {8, 4}) {
    InverseProblem problem{p, mesh, synthetic_data(*mesh, kTruth, DataMode::kRefined, patterns),
                           0.0, 0.0, start, kTruth, patterns};
    GaussNewtonOptions options;
    options.max_iters = 25;
    double err = 0.0;
    int steps = 0;
    try {
      const InversionResult r = gauss_newton(problem, options);
      err = relative_coefficient_error(r.gamma, kTruth);
      steps = r.trace.steps;
    } catch (const DivergenceError&) {
      err = std::numeric_limits<double>::infinity();
    }
    best = std::min(best, err);
    o.detail << fmt("M=%d: error %.3e after %d steps; ", patterns, err, steps);
  }
  o.detail << "h = 0.05, data on the 2x refined mesh";
  o.require(best <= 1e-4, "relative error <= 1e-4 within 25 iterations");
}

// --- 8: stability study ----------------------------------------------------------

void criterion_8(Outcome& o) {
  StabilityOptions options;
  options.h = 0.1;
  options.num_samples = 8;
  options.seed = 1;
  std::vector<double> c;
  for (int k = 1; k <= 4; ++k) {
    const auto p = DomainPartition::build(fixtures::layered_spec_for_tests(k));
    c.push_back(estimate_lipschitz_constant(p, 4.0, options).c_emp);
  }
  const auto p2 = DomainPartition::build(fixtures::layered_spec_for_tests(2));
  const double again = estimate_lipschitz_constant(p2, 4.0, options).c_emp;
  const bool identical = std::memcmp(&again, &c[1], sizeof(double)) == 0;
  bool monotone = true;
  for (int k = 1; k < 4; ++k) monotone = monotone && c[k] >= c[k - 1];

  const auto mesh = std::make_shared<const Mesh>(triangulate(p2, 0.1));
  const auto truth = random_admissible(p2, 4.0, 11);
  const auto start = PiecewiseLinearConductivity::from_coefficients(
      perturbed(truth.coefficients(), 0.05), 4.0);
  InverseProblem problem{p2, mesh, synthetic_data(*mesh, truth, DataMode::kSameMesh), 0.0, 0.0,
                         start, truth};
  const NoiseStudy study =
      noise_robustness(problem, {0.0, 1e-4, 3e-4, 1e-3, 3e-3, 1e-2}, 5);
  const double ratio = study.slope / c[1];
  o.detail << fmt("C_emp K=1..4: %.4g %.4g %.4g %.4g; repeat bit-identical: %s; noise slope %.4g "
                  "vs C_emp %.4g (ratio %.3f)",
                  c[0], c[1], c[2], c[3], identical ? "yes" : "no", study.slope, c[1], ratio);
  o.require(identical, "bit-identical C_emp");
  o.require(monotone, "non-decreasing in K");
  o.require(ratio >= 0.1 && ratio <= 10.0, "noise slope within a factor 10 of C_emp");
}

// --- 9: survey -------------------------------------------------------------------

PiecewiseLinearConductivity layered_rho(const std::vector<double>& rho) {
  Eigen::VectorXd c = Eigen::VectorXd::Zero(3 * static_cast<int>(rho.size()));
  for (std::size_t i = 0; i < rho.size(); ++i) c[3 * i] = rho[i];
  return PiecewiseLinearConductivity::from_coefficients(c, 10.0, true);
}

void criterion_9(Outcome& o) {
  const auto family = array_family(ArrayKind::kSchlumberger, {0.0}, {0.5, 1.0, 2.0, 4.0});
  const auto electrodes = electrode_positions(family);
  const auto homog = DomainPartition::build(layered_earth_spec(40.0, 40.0, {}));
  const auto hs = FemSystem::assemble(survey_mesh(homog, electrodes, 0.02, 0.25, 4.0), layered_rho({2.5}));
  double worst_h = 0.0;
  for (const auto& row : pseudo_section(hs, family)) {
    worst_h = std::max(worst_h, std::abs(row.apparent_resistivity / 2.5 - 1.0));
  }

  ArrayGeometry g;
  g.kind = ArrayKind::kDipoleDipole;
  g.spacing = 0.5;
  g.separation = 2;
  const ElectrodeArray fwd = make_array(g);
  ElectrodeArray rev = fwd;
  rev.a = fwd.m;
  rev.b = fwd.n;
  rev.m = fwd.a;
  rev.n = fwd.b;
  std::vector<Vec2> all = electrodes;
  for (const Vec2& e : {fwd.a, fwd.b, fwd.m, fwd.n}) all.push_back(e);
  const auto two = DomainPartition::build(layered_earth_spec(40.0, 40.0, {1.0}));
  const auto ts = FemSystem::assemble(survey_mesh(two, all, 0.02, 0.25, 4.0), layered_rho({1.0, 4.0}));
  const double v1 = simulate_sounding(ts, fwd).voltage, v2 = simulate_sounding(ts, rev).voltage;
  const double recip = std::abs(v1 - v2) / std::abs(v1);

  double worst_o = 0.0;
  o.detail << "two-layer rho_a (fem/oracle):";
  for (const auto& geo : family) {
    const ElectrodeArray e = make_array(geo);
    const double fem = simulate_sounding(ts, e).apparent_resistivity;
    const double oracle = layered_apparent_resistivity(e, 1.0, 4.0, 1.0);
    worst_o = std::max(worst_o, std::abs(fem / oracle - 1.0));
    o.detail << fmt(" %.4f/%.4f", fem, oracle);
  }
  o.detail << fmt("; homogeneous worst %.2f%%; reciprocity %.1e; oracle worst %.2f%% over %zu spacings",
                  100 * worst_h, recip, 100 * worst_o, family.size());
  o.require(worst_h <= 0.03, "homogeneous within 3%");
  o.require(recip <= 1e-8, "reciprocity 1e-8");
  o.require(worst_o <= 0.05 && family.size() >= 3, "oracle within 5% at 3 spacings");
}

// --- 10: determinism -------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void criterion_10(Outcome& o) {
  const fs::path configs = CALDERON_CONFIG_DIR;
  const fs::path scratch = fs::temp_directory_path() / "calderon_acceptance";
  int runs = 0, tables = 0, mismatched = 0;
  for (const auto& entry : fs::directory_iterator(configs)) {
    const fs::path file = entry.path();
    if (file.extension() != ".json") continue;
    Json j = Json::parse(slurp(file));
    if (!j.contains("experiment")) continue;
    const RunConfig config = load_config(file);
    const fs::path a = scratch / (file.stem().string() + "_a");
    const fs::path b = scratch / (file.stem().string() + "_b");
    fs::remove_all(a);
    fs::remove_all(b);
    const RunResult ra = run(config, a);
    run(config, b);
    run(load_config(a / "manifest.json"), scratch / (file.stem().string() + "_replay"));
    ++runs;
    for (const std::string& t : ra.tables) {
      ++tables;
      const std::string x = slurp(a / t);
      if (x != slurp(b / t) || x != slurp(scratch / (file.stem().string() + "_replay") / t)) {
        ++mismatched;
      }
    }
  }
  fs::remove_all(scratch);
  o.detail << fmt("%d configs, %d tables, %d differing across repeat and manifest replay", runs,
                  tables, mismatched);
  o.require(runs >= 7, "every experiment kind covered");
  o.require(mismatched == 0, "byte-identical tables");
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> allowed;
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::string(argv[i]) == "--allow-fail") {
      std::stringstream ss(argv[++i]);
      std::string id;
      while (std::getline(ss, id, ',')) allowed.insert(std::stoi(id));
    }
  }
  const std::vector<std::pair<const char*, std::function<void(Outcome&)>>> criteria{
      {"image-kernel exactness", criterion_1},  {"FEM correctness", criterion_2},
      {"DtoN integrity", criterion_3},          {"Green's-function bounds", criterion_4},
      {"interface asymptotics", criterion_5},   {"Frechet derivative", criterion_6},
      {"reconstruction from refined data", criterion_7},
      {"stability study", criterion_8},         {"survey", criterion_9},
      {"CLI determinism", criterion_10},
  };
  // Runtime budgets in seconds.
  const double budget[] = {1, 30, 60, 60, 300, 60, 300, 900, 120, 600};
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    const auto start = std::chrono::steady_clock::now();
    try {
      criteria[i].second(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << " [exception: " << e.what() << "]";
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    o.require(secs < budget[i], fmt("runtime < %g s", budget[i]));
    const int id = static_cast<int>(i + 1);
    std::cout << (o.pass ? "PASS" : "FAIL") << " [" << id << "] " << criteria[i].first << ": "
              << o.detail.str() << fmt(" (%.2f s)", secs) << std::endl;
    if (!o.pass && !allowed.count(id)) ++failures;
  }
  return failures;
}
