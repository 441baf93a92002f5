#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <memory>
#include <sstream>

#include "calderon/conductivity.hpp"
#include "calderon/errors.hpp"
#include "calderon/fem.hpp"
#include "calderon/geometry.hpp"
#include "calderon/greens.hpp"
#include "calderon/inversion.hpp"
#include "calderon/maps.hpp"
#include "calderon/mesh.hpp"
#include "calderon/runner.hpp"
#include "calderon/stability.hpp"
#include "calderon/survey.hpp"

namespace py = pybind11;
using namespace calderon;

namespace {

PyObject* g_error_type = nullptr;

Eigen::MatrixXd vertex_array(const Mesh& mesh) {
  Eigen::MatrixXd v(mesh.num_vertices(), 2);
  for (int i = 0; i < mesh.num_vertices(); ++i) v.row(i) = mesh.vertices[i].transpose();
  return v;
}

Eigen::MatrixXi triangle_array(const Mesh& mesh) {
  Eigen::MatrixXi t(mesh.num_triangles(), 3);
  for (int i = 0; i < mesh.num_triangles(); ++i) {
    for (int k = 0; k < 3; ++k) t(i, k) = mesh.triangles[i][k];
  }
  return t;
}

py::dict summary_dict(const Json& summary) {
  return py::module_::import("json").attr("loads")(summary.dump());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Piecewise-linear conductivity: forward maps, stability and inversion";

  g_error_type = PyErr_NewException("calderon._core.CalderonError", PyExc_RuntimeError, nullptr);
  m.attr("CalderonError") = py::handle(g_error_type);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object inst = py::reinterpret_steal<py::object>(
          PyObject_CallFunction(g_error_type, "s", e.what()));
      inst.attr("kind") = e.kind();
      inst.attr("category") = to_string(e.category());
      PyErr_SetObject(g_error_type, inst.ptr());
    }
  });

  // geometry
  py::class_<DomainPartition>(m, "Partition")
      .def_static("from_json",
                  [](const std::string& text) {
                    return DomainPartition::build(partition_from_json(Json::parse(text)));
                  })
      .def_static("layered",
                  [](int layers, double width, double depth, double r0, double L) {
                    return DomainPartition::build(layered_spec(layers, width, depth, r0, L));
                  },
                  py::arg("layers"), py::arg("width") = 1.0, py::arg("depth") = 1.0,
                  py::arg("r0"), py::arg("lipschitz_L") = 1.0)
      .def_static("layered_earth",
                  [](double half_width, double depth, const std::vector<double>& interfaces) {
                    return DomainPartition::build(layered_earth_spec(half_width, depth, interfaces));
                  },
                  py::arg("half_width"), py::arg("depth"), py::arg("interfaces") = std::vector<double>{})
      .def_property_readonly("num_subdomains", &DomainPartition::num_subdomains)
      .def("locate", [](const DomainPartition& p, double x, double y) { return p.locate(Vec2(x, y)); })
      .def("chain", [](const DomainPartition& p, int target) { return find_chain(p, target).ids; });

  // conductivity
  py::class_<PiecewiseLinearConductivity>(m, "Conductivity")
      .def(py::init([](const Eigen::VectorXd& c, double lambda, bool resistivity) {
             return PiecewiseLinearConductivity::from_coefficients(c, lambda, resistivity);
           }),
           py::arg("coefficients"), py::arg("lambda_"), py::arg("resistivity") = false)
      .def_static("constant", &PiecewiseLinearConductivity::constant)
      .def_static("random_admissible", &random_admissible, py::arg("partition"), py::arg("lambda_"),
                  py::arg("seed"))
      .def_property_readonly("coefficients", &PiecewiseLinearConductivity::coefficients)
      .def_property_readonly("lambda_", &PiecewiseLinearConductivity::lambda)
      .def_property_readonly("resistivity", &PiecewiseLinearConductivity::resistivity)
      .def_property_readonly("num_pieces", &PiecewiseLinearConductivity::num_pieces)
      .def("value", [](const PiecewiseLinearConductivity& g, int id, double x,
                       double y) { return g.value(id, Vec2(x, y)); })
      .def("is_admissible", &PiecewiseLinearConductivity::is_admissible, py::arg("partition"),
           py::arg("slack") = 1e-12);
  m.def("sup_norm", &sup_norm);

  // mesh
  py::class_<Mesh>(m, "Mesh")
      .def_property_readonly("vertices", &vertex_array)
      .def_property_readonly("triangles", &triangle_array)
      .def_property_readonly("num_vertices", &Mesh::num_vertices)
      .def_property_readonly("num_triangles", &Mesh::num_triangles)
      .def_readonly("h_max", &Mesh::h_max)
      .def("min_angle_deg", &Mesh::min_angle_deg);
  m.def("triangulate", py::overload_cast<const DomainPartition&, double>(&triangulate),
        py::arg("partition"), py::arg("h"));
  m.def("refine_uniform", [](const Mesh& mesh) { return refine_uniform(mesh).mesh; });

  // fem
  py::class_<FemSystem>(m, "FemSystem")
      .def(py::init([](const Mesh& mesh, const PiecewiseLinearConductivity& gamma) {
             return FemSystem::assemble(mesh, gamma);
           }),
           py::arg("mesh"), py::arg("gamma"))
      .def_property_readonly("sigma_nodes", &FemSystem::sigma_nodes)
      .def_property_readonly("num_dofs", &FemSystem::num_dofs)
      .def("solve_dirichlet",
           [](const FemSystem& s, const Eigen::VectorXd& g) { return s.solve_dirichlet(g); })
      .def("solve_neumann_load", &FemSystem::solve_neumann_load)
      .def("energy", &FemSystem::energy);

  // maps
  py::enum_<DtoNMethod>(m, "DtoNMethod")
      .value("auto", DtoNMethod::kAuto)
      .value("schur", DtoNMethod::kSchur)
      .value("columns", DtoNMethod::kColumns);
  m.def("assemble_dton",
        [](const FemSystem& s, DtoNMethod method) {
          const LocalDtoNMap map = assemble_dton(s, method);
          return py::make_tuple(map.matrix, map.sigma_nodes, map.fractional_metric);
        },
        py::arg("system"), py::arg("method") = DtoNMethod::kAuto,
        "Returns (matrix, sigma_nodes, fractional_metric).");
  m.def("operator_norm", &operator_norm, py::arg("delta"), py::arg("metric"));

  // greens
  m.def("gamma_kernel", [](const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    return gamma_kernel(x, y, static_cast<int>(x.size()));
  });
  m.def("two_phase_kernel", [](double a_plus, const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    if (x.size() == 3) return TwoPhaseKernel<3>(a_plus).value(x, y);
    return TwoPhaseKernel<2>(a_plus).value(x, y);
  });

  // stability
  m.def("omega", &omega, py::arg("b"), py::arg("t"));
  m.def("omega_iter", &omega_iter, py::arg("b"), py::arg("j"), py::arg("t"));
  m.def("omega_inverse_iter", &omega_inverse_iter, py::arg("b"), py::arg("j"), py::arg("s"));
  m.def("estimate_lipschitz_constant",
        [](const DomainPartition& p, double lambda, double h, int num_samples, std::uint64_t seed) {
          StabilityOptions o;
          o.h = h;
          o.num_samples = num_samples;
          o.seed = seed;
          const StabilityReport r = estimate_lipschitz_constant(p, lambda, o);
          std::vector<double> ratios;
          for (const auto& s : r.samples) ratios.push_back(s.ratio);
          py::dict d;
          d["c_emp"] = r.c_emp;
          d["c_structured"] = r.c_structured;
          d["ratios"] = ratios;
          d["chain_length"] = r.chain_length;
          return d;
        },
        py::arg("partition"), py::arg("lambda_"), py::arg("h") = 0.1, py::arg("num_samples") = 8,
        py::arg("seed") = 1);

  // inversion
  m.def("frechet_derivative",
        py::overload_cast<const FemSystem&, const Eigen::VectorXd&>(&frechet_derivative));
  m.def("synthetic_data",
        [](const Mesh& mesh, const PiecewiseLinearConductivity& truth, bool refined, int patterns) {
          return synthetic_data(mesh, truth, refined ? DataMode::kRefined : DataMode::kSameMesh,
                                patterns);
        },
        py::arg("mesh"), py::arg("truth"), py::arg("refined") = false, py::arg("num_patterns") = 0);
  m.def("reconstruct",
        [](const DomainPartition& p, const Mesh& mesh, const Eigen::MatrixXd& measured,
           const PiecewiseLinearConductivity& initial, int num_patterns, int max_iters) {
          InverseProblem problem{p, std::make_shared<const Mesh>(mesh), measured, 0.0, 0.0,
                                 initial, std::nullopt, num_patterns};
          GaussNewtonOptions o;
          o.max_iters = max_iters;
          const InversionResult r = gauss_newton(problem, o);
          std::vector<double> misfits;
          for (const auto& rec : r.trace.records) misfits.push_back(rec.misfit_frobenius);
          return py::make_tuple(r.gamma, misfits, r.trace.converged);
        },
        py::arg("partition"), py::arg("mesh"), py::arg("measured"), py::arg("initial"),
        py::arg("num_patterns") = 0, py::arg("max_iters") = 25,
        "Returns (estimate, misfit history, converged).");
  m.def("relative_coefficient_error", &relative_coefficient_error);

  // survey
  m.def("survey_mesh",
        [](const DomainPartition& p, const Eigen::MatrixXd& electrodes, double h_min,
           double grading, double h_far) {
          std::vector<Vec2> e;
          for (int i = 0; i < electrodes.rows(); ++i) e.emplace_back(electrodes(i, 0), electrodes(i, 1));
          return survey_mesh(p, e, h_min, grading, h_far);
        },
        py::arg("partition"), py::arg("electrodes"), py::arg("h_min") = 0.02,
        py::arg("grading") = 0.25, py::arg("h_far") = 4.0);
  m.def("array_electrodes",
        [](const std::string& kind, double center, double spacing) {
          ArrayGeometry g;
          g.kind = parse_array_kind(kind);
          g.center = Vec2(center, 0.0);
          g.spacing = spacing;
          const ElectrodeArray e = make_array(g);
          Eigen::MatrixXd out(4, 2);
          out.row(0) = e.a.transpose();
          out.row(1) = e.b.transpose();
          out.row(2) = e.m.transpose();
          out.row(3) = e.n.transpose();
          return out;
        },
        "Rows A, B, M, N.");
  m.def("apparent_resistivity",
        [](const FemSystem& s, const std::string& kind, double center, double spacing) {
          ArrayGeometry g;
          g.kind = parse_array_kind(kind);
          g.center = Vec2(center, 0.0);
          g.spacing = spacing;
          return simulate_sounding(s, make_array(g)).apparent_resistivity;
        });
  m.def("layered_apparent_resistivity",
        [](const std::string& kind, double center, double spacing, double rho1, double rho2,
           double thickness) {
          ArrayGeometry g;
          g.kind = parse_array_kind(kind);
          g.center = Vec2(center, 0.0);
          g.spacing = spacing;
          return layered_apparent_resistivity(make_array(g), rho1, rho2, thickness);
        });

  // runner
  m.def("validate_config",
        [](const std::string& text, const std::filesystem::path& base_dir) {
          validate(parse_config(Json::parse(text), base_dir));
        },
        py::arg("config_json"), py::arg("base_dir") = std::filesystem::path("."));
  m.def("run_config",
        [](const std::string& text, const std::filesystem::path& base_dir,
           const std::filesystem::path& output_dir) {
          const RunResult r = run(parse_config(Json::parse(text), base_dir), output_dir);
          return summary_dict(r.summary);
        },
        py::arg("config_json"), py::arg("base_dir"), py::arg("output_dir"));
  m.def("compare_runs",
        [](const std::filesystem::path& a, const std::filesystem::path& b, const std::string& tol) {
          const CompareReport r = compare(a, b, parse_tolerance(tol));
          py::list out;
          for (const auto& t : r.tables) {
            py::dict d;
            d["table"] = t.table;
            d["max_abs"] = t.max_abs;
            d["max_rel"] = t.max_rel;
            d["breach"] = t.breach;
            out.append(d);
          }
          return out;
        },
        py::arg("baseline"), py::arg("candidate"), py::arg("tol") = "0");
}
