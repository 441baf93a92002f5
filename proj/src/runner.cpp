#include "calderon/runner.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "calderon/errors.hpp"
#include "calderon/fem.hpp"
#include "calderon/greens.hpp"
#include "calderon/inversion.hpp"
#include "calderon/maps.hpp"
#include "calderon/mesh.hpp"
#include "calderon/stability.hpp"
#include "calderon/survey.hpp"

namespace calderon {

namespace fs = std::filesystem;

namespace {

constexpr const char* kVersion = "0.1.0";
constexpr int kManifestVersion = 1;

struct KindName {
  ExperimentKind kind;
  const char* name;
};
constexpr KindName kKinds[] = {
    {ExperimentKind::kForward, "forward"},       {ExperimentKind::kDtoN, "dton"},
    {ExperimentKind::kAsymptotics, "asymptotics"}, {ExperimentKind::kStability, "stability"},
    {ExperimentKind::kInversion, "inversion"},   {ExperimentKind::kSurvey, "survey"},
    {ExperimentKind::kBlowUp, "blowup"},
};

// Parameter keys accepted by each experiment.
const std::set<std::string>& allowed_parameters(ExperimentKind kind) {
  static const std::map<ExperimentKind, std::set<std::string>> table{
      {ExperimentKind::kForward, {"pattern"}},
      {ExperimentKind::kDtoN, {"method"}},
      {ExperimentKind::kAsymptotics,
       {"gamma_minus", "gamma_plus", "slope_minus", "slope_plus", "r0", "width", "depth", "radii",
        "angle", "grading", "h_far"}},
      {ExperimentKind::kStability, {"lambda", "num_samples", "structured_scale"}},
      {ExperimentKind::kInversion,
       {"mode", "num_patterns", "perturbation", "regularization", "max_iters", "tol",
        "noise_levels"}},
      {ExperimentKind::kSurvey,
       {"array", "centers", "spacings", "inner", "separation", "remote", "current", "h_min",
        "grading", "h_far", "mirror", "oracle"}},
      {ExperimentKind::kBlowUp, {"interface_k", "radii", "h_far", "grading", "target"}},
  };
  return table.at(kind);
}

int required_conductivities(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::kAsymptotics:
    case ExperimentKind::kStability: return 0;
    case ExperimentKind::kBlowUp: return 2;
    default: return 1;
  }
}

bool needs_partition(ExperimentKind kind) { return kind != ExperimentKind::kAsymptotics; }

template <typename T>
T param(const Json& params, const char* key, T fallback) {
  if (!params.contains(key)) return fallback;
  try {
    return params.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("parameter '") + key + "': " + e.what());
  }
}

Vec2 vec2(const Json& j, const char* what) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
    throw ConfigError(std::string(what) + " must be a pair of numbers");
  }
  return Vec2(j[0].get<double>(), j[1].get<double>());
}

Vec2 param_vec2(const Json& params, const char* key, Vec2 fallback) {
  return params.contains(key) ? vec2(params.at(key), key) : fallback;
}

Json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

Json inline_reference(const Json& j, const fs::path& base_dir) {
  return j.is_string() ? read_json_file(base_dir / j.get<std::string>()) : j;
}

std::string format_double(double v) {
  std::ostringstream out;
  out << std::setprecision(17) << v;
  return out.str();
}

void write_table(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out << content;
}

std::vector<std::vector<std::string>> read_table(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SchemaMismatchError("missing table '" + path.string() + "'");
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, '\t')) cells.push_back(cell);
    rows.push_back(std::move(cells));
  }
  return rows;
}

std::optional<double> as_number(const std::string& s) {
  if (s.empty()) return std::nullopt;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) return std::nullopt;
  return v;
}

PiecewiseLinearConductivity perturbed(const PiecewiseLinearConductivity& gamma, double scale) {
  Eigen::VectorXd c = gamma.coefficients();
  for (int k = 0; k < c.size(); ++k) c[k] *= 1.0 + (k % 2 == 0 ? -scale : scale);
  return PiecewiseLinearConductivity::from_coefficients(c, gamma.lambda(), gamma.resistivity());
}

std::vector<double> double_list(const Json& params, const char* key) {
  return param<std::vector<double>>(params, key, {});
}

// Tables produced by one experiment, in write order.
struct Output {
  std::vector<std::pair<std::string, std::string>> tables;
  Json summary = Json::object();
};

Output run_forward(const RunConfig& c, const DomainPartition& partition,
                   const std::vector<PiecewiseLinearConductivity>& gammas) {
  const Mesh mesh = triangulate(partition, c.mesh_size);
  const FemSystem sys = FemSystem::assemble(mesh, gammas[0]);
  const int pattern = param<int>(c.parameters, "pattern", 1);
  const Eigen::MatrixXd patterns = boundary_patterns(mesh, pattern);
  const Field u = sys.solve_dirichlet(Eigen::VectorXd(patterns.col(pattern - 1)));
  std::ostringstream field;
  write_field(field, mesh, u);
  Output out;
  out.tables.emplace_back("field.tsv", field.str());
  out.summary["num_vertices"] = mesh.num_vertices();
  out.summary["num_triangles"] = mesh.num_triangles();
  out.summary["energy"] = sys.energy(u, u);
  out.summary["max_abs_u"] = u.cwiseAbs().maxCoeff();
  return out;
}

Output run_dton(const RunConfig& c, const DomainPartition& partition,
                const std::vector<PiecewiseLinearConductivity>& gammas) {
  const std::string name = param<std::string>(c.parameters, "method", "auto");
  DtoNMethod method = DtoNMethod::kAuto;
  if (name == "schur") method = DtoNMethod::kSchur;
  else if (name == "columns") method = DtoNMethod::kColumns;
  const Mesh mesh = triangulate(partition, c.mesh_size);
  const FemSystem sys = FemSystem::assemble(mesh, gammas[0]);
  const LocalDtoNMap map = assemble_dton(sys, method);
  std::ostringstream table;
  write_matrix(table, mesh, map.sigma_nodes, map.matrix);
  Output out;
  out.tables.emplace_back("dton.tsv", table.str());
  out.summary["num_sigma_nodes"] = static_cast<int>(map.sigma_nodes.size());
  out.summary["symmetry_error"] = (map.matrix - map.matrix.transpose()).cwiseAbs().maxCoeff();
  out.summary["frobenius_norm"] = map.matrix.norm();
  out.summary["operator_norm"] = operator_norm(map.matrix, map.fractional_metric);
  return out;
}

Output run_asymptotics(const RunConfig& c) {
  const Json& p = c.parameters;
  AsymptoticsConfig a;
  a.gamma_minus = param(p, "gamma_minus", a.gamma_minus);
  a.gamma_plus = param(p, "gamma_plus", a.gamma_plus);
  a.slope_minus = param_vec2(p, "slope_minus", a.slope_minus);
  a.slope_plus = param_vec2(p, "slope_plus", a.slope_plus);
  a.r0 = param(p, "r0", a.r0);
  a.width = param(p, "width", a.width);
  a.depth = param(p, "depth", a.depth);
  a.radii = double_list(p, "radii");
  a.angle = param(p, "angle", a.angle);
  a.grading = param(p, "grading", a.grading);
  a.h_far = param(p, "h_far", a.h_far);
  const AsymptoticsReport r = verify_asymptotics(a);
  std::ostringstream table;
  table << std::setprecision(17)
        << "radius\tdistance\tgreen\tvalue_residual\tgradient_residual\tmixed_residual\n";
  for (std::size_t i = 0; i < r.radii.size(); ++i) {
    table << r.radii[i] << '\t' << r.distance[i] << '\t' << r.green[i] << '\t'
          << r.value_residual[i] << '\t' << r.gradient_residual[i] << '\t' << r.mixed_residual[i]
          << '\n';
  }
  Output out;
  out.tables.emplace_back("asymptotics.tsv", table.str());
  out.summary["predicted_coefficient"] = r.predicted_coefficient;
  out.summary["fitted_coefficient"] = r.fitted_coefficient;
  out.summary["value_exponent"] = r.value_exponent;
  out.summary["gradient_exponent"] = r.gradient_exponent;
  out.summary["mixed_exponent"] = r.mixed_exponent;
  out.summary["regular_part"] = r.regular_part;
  out.summary["num_triangles"] = r.num_triangles;
  return out;
}

Output run_stability(const RunConfig& c, const DomainPartition& partition) {
  StabilityOptions o;
  o.h = c.mesh_size;
  o.seed = *c.seed;
  o.num_samples = param(c.parameters, "num_samples", o.num_samples);
  o.structured_scale = param(c.parameters, "structured_scale", o.structured_scale);
  const StabilityReport r =
      estimate_lipschitz_constant(partition, param(c.parameters, "lambda", 4.0), o);
  std::ostringstream table;
  table << std::setprecision(17) << "id\tseed\tstructured\tsup_norm\tmap_norm\tratio\n";
  for (const auto& s : r.samples) {
    table << s.id << '\t' << s.seed << '\t' << (s.structured ? 1 : 0) << '\t' << s.sup_norm << '\t'
          << s.map_norm << '\t' << s.ratio << '\n';
  }
  Output out;
  out.tables.emplace_back("samples.tsv", table.str());
  out.summary["c_emp"] = r.c_emp;
  out.summary["c_structured"] = r.c_structured;
  out.summary["num_subdomains"] = r.num_subdomains;
  out.summary["chain_length"] = r.chain_length;
  return out;
}

Output run_inversion(const RunConfig& c, const DomainPartition& partition,
                     const std::vector<PiecewiseLinearConductivity>& gammas) {
  const Json& p = c.parameters;
  const std::string mode_name = param<std::string>(p, "mode", "refined");
  const DataMode mode = mode_name == "same" ? DataMode::kSameMesh : DataMode::kRefined;
  auto mesh = std::make_shared<const Mesh>(triangulate(partition, c.mesh_size));
  const PiecewiseLinearConductivity& truth = gammas[0];
  InverseProblem problem{partition, mesh, {}, 0.0, param(p, "regularization", 0.0),
                         gammas.size() > 1 ? gammas[1]
                                           : perturbed(truth, param(p, "perturbation", 0.05)),
                         truth, param(p, "num_patterns", 0)};
  problem.initial.require_admissible(partition);
  problem.measured = synthetic_data(*mesh, truth, mode, problem.num_patterns);
  GaussNewtonOptions o;
  o.max_iters = param(p, "max_iters", o.max_iters);
  o.tol = param(p, "tol", o.tol);
  const InversionResult result = gauss_newton(problem, o);
  std::ostringstream trace;
  write_trace(trace, result.trace);
  Output out;
  out.tables.emplace_back("trace.tsv", trace.str());
  out.summary["steps"] = result.trace.steps;
  out.summary["converged"] = result.trace.converged;
  out.summary["relative_error"] = relative_coefficient_error(result.gamma, truth);
  out.summary["final_misfit"] = result.trace.records.back().misfit_frobenius;
  out.summary["estimate"] = conductivity_to_json(result.gamma);

  const std::vector<double> levels = double_list(p, "noise_levels");
  if (!levels.empty()) {
    const NoiseStudy study = noise_robustness(problem, levels, *c.seed, o);
    std::ostringstream noise;
    noise << std::setprecision(17) << "noise\terror\tinformative\n";
    for (const auto& row : study.rows) {
      noise << row.noise << '\t' << row.error << '\t' << (row.informative ? 1 : 0) << '\n';
    }
    out.tables.emplace_back("noise.tsv", noise.str());
    out.summary["noise_slope"] = study.slope;
    out.summary["noise_baseline"] = study.baseline;
    out.summary["signal_gap"] = study.signal_gap;
  }
  return out;
}

std::vector<ArrayGeometry> survey_family(const Json& p) {
  const ArrayKind kind = parse_array_kind(param<std::string>(p, "array", "schlumberger"));
  std::vector<double> centers = double_list(p, "centers");
  if (centers.empty()) centers = {0.0};
  const std::vector<double> spacings = double_list(p, "spacings");
  if (spacings.empty()) throw ConfigError("survey needs a non-empty 'spacings' list");
  std::vector<ArrayGeometry> family = array_family(kind, centers, spacings);
  for (ArrayGeometry& g : family) {
    g.inner = param(p, "inner", g.inner);
    g.separation = param(p, "separation", g.separation);
    g.remote = param(p, "remote", g.remote);
    g.current = param(p, "current", g.current);
  }
  return family;
}

Output run_survey(const RunConfig& c, const DomainPartition& partition,
                  const std::vector<PiecewiseLinearConductivity>& gammas) {
  const Json& p = c.parameters;
  const std::vector<ArrayGeometry> family = survey_family(p);
  const Mesh mesh = survey_mesh(partition, electrode_positions(family), param(p, "h_min", 0.02),
                                param(p, "grading", 0.25), param(p, "h_far", 4.0),
                                param(p, "mirror", false));
  const FemSystem sys = FemSystem::assemble(mesh, gammas[0]);
  const std::vector<PseudoSectionRow> rows = pseudo_section(sys, family);
  std::ostringstream table;
  write_pseudo_section(table, rows);
  Output out;
  out.tables.emplace_back("pseudo_section.tsv", table.str());
  out.summary["soundings"] = static_cast<int>(rows.size());
  out.summary["num_vertices"] = mesh.num_vertices();
  if (p.contains("oracle")) {
    const Json& o = p.at("oracle");
    const double rho1 = param(o, "rho1", 1.0), rho2 = param(o, "rho2", 1.0);
    const double thickness = param(o, "thickness", 1.0);
    std::vector<ArrayGeometry> sorted = family;
    std::stable_sort(sorted.begin(), sorted.end(), [](const auto& x, const auto& y) {
      if (x.spacing != y.spacing) return x.spacing < y.spacing;
      return x.center.x() < y.center.x();
    });
    std::ostringstream cmp;
    cmp << std::setprecision(17) << "midpoint\tspacing\tfem\toracle\trel_diff\n";
    double worst = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const double oracle =
          layered_apparent_resistivity(make_array(sorted[i]), rho1, rho2, thickness);
      const double rel = std::abs(rows[i].apparent_resistivity - oracle) / std::abs(oracle);
      worst = std::max(worst, rel);
      cmp << rows[i].midpoint << '\t' << rows[i].spacing << '\t' << rows[i].apparent_resistivity
          << '\t' << oracle << '\t' << rel << '\n';
    }
    out.tables.emplace_back("oracle.tsv", cmp.str());
    out.summary["max_oracle_rel_diff"] = worst;
  }
  return out;
}

Output run_blowup(const RunConfig& c, const DomainPartition& partition,
                  const std::vector<PiecewiseLinearConductivity>& gammas) {
  const Json& p = c.parameters;
  BlowUpOptions o;
  o.interface_k = param(p, "interface_k", o.interface_k);
  o.radii = double_list(p, "radii");
  o.h_far = param(p, "h_far", o.h_far);
  o.grading = param(p, "grading", o.grading);
  o.target = param(p, "target", o.target);
  const BlowUpTable t = blow_up_study(partition, gammas[0], gammas[1], o);
  std::ostringstream table;
  table << std::setprecision(17) << "r\tm\twx\twy\tsigma\tvalue\tmixed\n";
  for (const auto& row : t.rows) {
    table << row.r << '\t' << row.m << '\t' << row.w.x() << '\t' << row.w.y() << '\t' << row.sigma
          << '\t' << row.value << '\t' << row.mixed << '\n';
  }
  Output out;
  out.tables.emplace_back("blowup.tsv", table.str());
  out.summary["value_exponent"] = t.value_exponent;
  out.summary["mixed_exponent"] = t.mixed_exponent;
  return out;
}

std::string summary_table(const Json& summary) {
  std::ostringstream out;
  out << "key\tvalue\n";
  for (const auto& [key, value] : summary.items()) {
    if (value.is_number_float()) {
      out << key << '\t' << format_double(value.get<double>()) << '\n';
    } else if (value.is_number() || value.is_boolean()) {
      out << key << '\t' << value.dump() << '\n';
    }
  }
  return out.str();
}

Json versions() {
  Json v;
  v["calderon"] = kVersion;
  v["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
               "." + std::to_string(EIGEN_MINOR_VERSION);
  v["nlohmann_json"] = std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                       std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                       std::to_string(NLOHMANN_JSON_VERSION_PATCH);
  v["compiler"] = __VERSION__;
  return v;
}

}  // namespace

const char* to_string(ExperimentKind kind) {
  for (const auto& k : kKinds) {
    if (k.kind == kind) return k.name;
  }
  return "unknown";
}

ExperimentKind parse_experiment_kind(const std::string& name) {
  for (const auto& k : kKinds) {
    if (name == k.name) return k.kind;
  }
  throw ConfigError("unknown experiment kind '" + name + "'");
}

PartitionSpec partition_from_json(const Json& j) {
  try {
    if (j.contains("layered")) {
      const Json& l = j.at("layered");
      const int layers = l.at("layers").get<int>();
      return layered_spec(layers, l.value("width", 1.0), l.value("depth", 1.0),
                          l.value("r0", std::min(1.0, 2.4 / std::max(layers, 1))),
                          l.value("lipschitz_L", 1.0));
    }
    if (j.contains("layered_earth")) {
      const Json& l = j.at("layered_earth");
      return layered_earth_spec(l.at("half_width").get<double>(), l.at("depth").get<double>(),
                                l.value("interfaces", std::vector<double>{}));
    }
    PartitionSpec spec;
    for (const Json& v : j.at("vertices")) spec.vertices.push_back(vec2(v, "vertex"));
    spec.outer = j.at("outer").get<std::vector<int>>();
    spec.subdomains = j.at("subdomains").get<std::vector<std::vector<int>>>();
    spec.sigma_edges = j.at("sigma_edges").get<std::vector<int>>();
    spec.r0 = j.at("r0").get<double>();
    spec.lipschitz_L = j.value("lipschitz_L", 1.0);
    for (const Json& pair : j.value("declared_interfaces", Json::array())) {
      spec.declared_interfaces.emplace_back(pair.at(0).get<int>(), pair.at(1).get<int>());
    }
    spec.enforce_apriori = j.value("enforce_apriori", true);
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("partition: ") + e.what());
  }
}

PiecewiseLinearConductivity conductivity_from_json(const Json& j) {
  try {
    const double lambda = j.at("lambda").get<double>();
    const bool resistivity = j.value("resistivity", false);
    std::vector<AffinePiece> pieces;
    if (j.contains("values")) {
      for (const Json& v : j.at("values")) pieces.push_back({v.get<double>(), Vec2::Zero()});
    } else {
      for (const Json& p : j.at("pieces")) {
        pieces.push_back({p.at("a").get<double>(),
                          p.contains("A") ? vec2(p.at("A"), "slope") : Vec2::Zero()});
      }
    }
    return PiecewiseLinearConductivity(std::move(pieces), lambda, resistivity);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("conductivity: ") + e.what());
  }
}

Json conductivity_to_json(const PiecewiseLinearConductivity& gamma) {
  Json j;
  j["lambda"] = gamma.lambda();
  j["resistivity"] = gamma.resistivity();
  Json pieces = Json::array();
  for (const AffinePiece& p : gamma.pieces()) pieces.push_back({{"a", p.a}, {"A", {p.A.x(), p.A.y()}}});
  j["pieces"] = pieces;
  return j;
}

Json RunConfig::to_json() const {
  Json j;
  j["experiment"] = to_string(experiment);
  if (!partition.is_null()) j["partition"] = partition;
  if (!conductivities.empty()) j["conductivity"] = conductivities;
  j["mesh_size"] = mesh_size;
  if (seed) j["seed"] = *seed;
  j["output_dir"] = output_dir;
  j["parameters"] = parameters;
  return j;
}

RunConfig parse_config(const Json& input, const fs::path& base_dir) {
  if (!input.is_object()) throw ConfigError("config must be a JSON object");
  if (input.contains("manifest_version")) {
    if (!input.contains("config")) throw ConfigError("manifest without a config echo");
    return parse_config(input.at("config"), base_dir);
  }
  static const std::set<std::string> known{"experiment", "partition", "conductivity", "mesh_size",
                                           "seed",       "output_dir", "parameters"};
  for (const auto& [key, value] : input.items()) {
    if (!known.count(key)) throw ConfigError("unknown config field '" + key + "'");
  }
  RunConfig c;
  c.base_dir = base_dir;
  try {
    if (!input.contains("experiment")) throw ConfigError("config lacks 'experiment'");
    c.experiment = parse_experiment_kind(input.at("experiment").get<std::string>());
    if (input.contains("partition")) c.partition = inline_reference(input.at("partition"), base_dir);
    if (input.contains("conductivity")) {
      const Json& g = input.at("conductivity");
      if (g.is_array()) {
        for (const Json& item : g) c.conductivities.push_back(inline_reference(item, base_dir));
      } else {
        c.conductivities.push_back(inline_reference(g, base_dir));
      }
    }
    c.mesh_size = input.value("mesh_size", c.mesh_size);
    if (input.contains("seed")) c.seed = input.at("seed").get<std::uint64_t>();
    c.output_dir = input.value("output_dir", c.output_dir);
    if (input.contains("parameters")) c.parameters = input.at("parameters");
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (!c.parameters.is_object()) throw ConfigError("'parameters' must be an object");
  return c;
}

RunConfig load_config(const fs::path& path) {
  return parse_config(read_json_file(path), path.parent_path());
}

namespace {

struct Prepared {
  std::optional<DomainPartition> partition;
  std::vector<PiecewiseLinearConductivity> gammas;
};

Prepared prepare(const RunConfig& c) {
  for (const auto& [key, value] : c.parameters.items()) {
    if (!allowed_parameters(c.experiment).count(key)) {
      throw ConfigError("parameter '" + key + "' is not used by " + to_string(c.experiment));
    }
  }
  if (!(c.mesh_size > 0.0)) throw ConfigError("mesh_size must be positive");
  const bool stochastic = c.experiment == ExperimentKind::kStability ||
                          (c.experiment == ExperimentKind::kInversion &&
                           c.parameters.contains("noise_levels"));
  if (stochastic && !c.seed) throw ConfigError("seed required for this experiment");

  Prepared p;
  if (needs_partition(c.experiment)) {
    if (c.partition.is_null()) throw ConfigError("config lacks 'partition'");
    p.partition = DomainPartition::build(partition_from_json(c.partition));
  }
  const int needed = required_conductivities(c.experiment);
  if (static_cast<int>(c.conductivities.size()) < needed) {
    throw ConfigError(std::string(to_string(c.experiment)) + " needs " + std::to_string(needed) +
                      " conductivity description(s)");
  }
  for (const Json& j : c.conductivities) {
    p.gammas.push_back(conductivity_from_json(j));
    if (p.partition) {
      if (p.gammas.back().num_pieces() != p.partition->num_subdomains()) {
        throw ConfigError("conductivity has " + std::to_string(p.gammas.back().num_pieces()) +
                          " pieces for " + std::to_string(p.partition->num_subdomains()) +
                          " subdomains");
      }
      p.gammas.back().require_admissible(*p.partition);
    }
  }
  if (c.experiment == ExperimentKind::kSurvey) survey_family(c.parameters);
  if (c.experiment == ExperimentKind::kDtoN) {
    const std::string m = param<std::string>(c.parameters, "method", "auto");
    if (m != "auto" && m != "schur" && m != "columns") throw ConfigError("unknown method '" + m + "'");
  }
  if (c.experiment == ExperimentKind::kInversion) {
    const std::string m = param<std::string>(c.parameters, "mode", "refined");
    if (m != "same" && m != "refined") throw ConfigError("unknown mode '" + m + "'");
  }
  if (c.experiment == ExperimentKind::kForward && param<int>(c.parameters, "pattern", 1) < 1) {
    throw ConfigError("pattern must be >= 1");
  }
  return p;
}

}  // namespace

void validate(const RunConfig& config) { prepare(config); }

RunResult run(const RunConfig& config, const std::optional<fs::path>& output_override) {
  const auto start = std::chrono::steady_clock::now();
  const Prepared p = prepare(config);
  Output out;
  switch (config.experiment) {
    case ExperimentKind::kForward: out = run_forward(config, *p.partition, p.gammas); break;
    case ExperimentKind::kDtoN: out = run_dton(config, *p.partition, p.gammas); break;
    case ExperimentKind::kAsymptotics: out = run_asymptotics(config); break;
    case ExperimentKind::kStability: out = run_stability(config, *p.partition); break;
    case ExperimentKind::kInversion: out = run_inversion(config, *p.partition, p.gammas); break;
    case ExperimentKind::kSurvey: out = run_survey(config, *p.partition, p.gammas); break;
    case ExperimentKind::kBlowUp: out = run_blowup(config, *p.partition, p.gammas); break;
  }

  RunResult result;
  fs::path dir = output_override ? *output_override : fs::path(config.output_dir);
  if (dir.is_relative() && !output_override) dir = config.base_dir / dir;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create '" + dir.string() + "': " + ec.message());
  result.output_dir = dir;

  out.tables.emplace_back("summary.tsv", summary_table(out.summary));
  for (const auto& [name, content] : out.tables) {
    write_table(dir / name, content);
    result.tables.push_back(name);
  }
  result.summary = out.summary;
  result.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  Json manifest;
  manifest["manifest_version"] = kManifestVersion;
  manifest["experiment"] = to_string(config.experiment);
  manifest["config"] = config.to_json();
  manifest["versions"] = versions();
  manifest["wall_time_s"] = result.wall_time;
  manifest["tables"] = result.tables;
  manifest["summary"] = out.summary;
  write_table(dir / "manifest.json", manifest.dump(2) + "\n");
  return result;
}

const Tolerance& ToleranceSpec::for_table(const std::string& table) const {
  const auto it = per_table.find(table);
  return it == per_table.end() ? fallback : it->second;
}

ToleranceSpec parse_tolerance(const std::string& text) {
  ToleranceSpec spec;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    Tolerance* target = &spec.fallback;
    const auto colon = item.find(':');
    if (colon != std::string::npos) {
      const std::string table = item.substr(0, colon);
      if (!spec.per_table.count(table)) spec.per_table[table] = spec.fallback;
      target = &spec.per_table[table];
      item = item.substr(colon + 1);
    }
    const auto eq = item.find('=');
    const std::string key = eq == std::string::npos ? "abs" : item.substr(0, eq);
    const auto value = as_number(eq == std::string::npos ? item : item.substr(eq + 1));
    if (!value || *value < 0.0 || (key != "abs" && key != "rel")) {
      throw ConfigError("bad tolerance entry '" + item + "'");
    }
    (key == "abs" ? target->abs : target->rel) = *value;
  }
  return spec;
}

bool CompareReport::breach() const {
  return std::any_of(tables.begin(), tables.end(), [](const TableDiff& t) { return t.breach; });
}

CompareReport compare(const fs::path& baseline, const fs::path& candidate,
                      const ToleranceSpec& tolerance) {
  const Json a = read_json_file(baseline / "manifest.json");
  const Json b = read_json_file(candidate / "manifest.json");
  const std::string kind_a = a.value("experiment", ""), kind_b = b.value("experiment", "");
  if (kind_a != kind_b) {
    throw SchemaMismatchError("experiment kinds differ: " + kind_a + " vs " + kind_b);
  }
  const auto tables = a.value("tables", std::vector<std::string>{});
  if (tables != b.value("tables", std::vector<std::string>{})) {
    throw SchemaMismatchError("table lists differ");
  }
  CompareReport report;
  report.experiment = kind_a;
  for (const std::string& name : tables) {
    const auto ta = read_table(baseline / name);
    const auto tb = read_table(candidate / name);
    if (ta.size() != tb.size()) throw SchemaMismatchError(name + ": row counts differ");
    if (ta.empty() || ta[0] != tb[0]) throw SchemaMismatchError(name + ": headers differ");
    const Tolerance& tol = tolerance.for_table(name);
    TableDiff diff;
    diff.table = name;
    double worst_excess = 0.0;
    for (std::size_t r = 1; r < ta.size(); ++r) {
      if (ta[r].size() != tb[r].size()) {
        throw SchemaMismatchError(name + ": row " + std::to_string(r) + " has a different width");
      }
      for (std::size_t k = 0; k < ta[r].size(); ++k) {
        const std::string& x = ta[r][k];
        const std::string& y = tb[r][k];
        if (x == y) continue;
        const auto vx = as_number(x), vy = as_number(y);
        double excess = std::numeric_limits<double>::infinity();
        if (vx && vy && std::isfinite(*vx) && std::isfinite(*vy)) {
          const double d = std::abs(*vx - *vy);
          diff.max_abs = std::max(diff.max_abs, d);
          if (*vx != 0.0) diff.max_rel = std::max(diff.max_rel, d / std::abs(*vx));
          excess = d - (tol.abs + tol.rel * std::abs(*vx));
        }
        if (excess > 0.0 && (!diff.breach || excess > worst_excess)) {
          diff.breach = true;
          worst_excess = excess;
          diff.row = static_cast<int>(r);
          diff.column = k < ta[0].size() ? ta[0][k] : std::to_string(k);
          diff.baseline = x;
          diff.candidate = y;
        }
      }
    }
    report.tables.push_back(diff);
  }
  return report;
}

}  // namespace calderon
