#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "calderon/errors.hpp"
#include "calderon/runner.hpp"

using namespace calderon;
namespace fs = std::filesystem;

namespace {

const fs::path kConfigs = CALDERON_CONFIG_DIR;
const fs::path kScratch = CALDERON_SCRATCH_DIR;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

struct Shell {
  int code = 0;
  std::string err;
};

Shell cli(const std::string& args, const std::string& env = "") {
  const fs::path err = kScratch / "stderr.txt";
  const std::string cmd = env + " \"" + std::string(CALDERON_CLI_PATH) + "\" " + args + " >/dev/null 2>\"" +
                          err.string() + "\"";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(err)};
}

fs::path fresh(const std::string& name) {
  const fs::path dir = kScratch / name;
  fs::remove_all(dir);
  return dir;
}

void run_to(const std::string& config, const fs::path& dir) {
  run(load_config(kConfigs / config), dir);
}

}  // namespace

TEST_CASE("forward run writes the field table and a manifest") {
  fs::create_directories(kScratch);
  const fs::path dir = fresh("forward");
  REQUIRE(cli("run \"" + (kConfigs / "forward.json").string() + "\" -o \"" + dir.string() + "\"")
              .code == 0);
  CHECK(fs::exists(dir / "field.tsv"));
  CHECK(slurp(dir / "field.tsv").rfind("x\ty\tu\n", 0) == 0);
  const Json manifest = Json::parse(slurp(dir / "manifest.json"));
  CHECK(manifest["experiment"] == "forward");
  CHECK(manifest["config"]["partition"].is_object());
  CHECK(manifest["versions"].contains("eigen"));
  CHECK(manifest["wall_time_s"].get<double>() >= 0.0);
  CHECK(manifest["tables"] == Json::array({"field.tsv", "summary.tsv"}));
}

TEST_CASE("identical configs give byte-identical tables") {
  for (const char* config : {"forward.json", "dton.json", "stability.json", "inversion.json"}) {
    CAPTURE(config);
    const fs::path a = fresh("det_a"), b = fresh("det_b");
    run_to(config, a);
    run_to(config, b);
    for (const auto& name : Json::parse(slurp(a / "manifest.json"))["tables"]) {
      CHECK(slurp(a / name.get<std::string>()) == slurp(b / name.get<std::string>()));
    }
  }
}

TEST_CASE("a manifest replays its run") {
  const fs::path a = fresh("replay_a"), b = fresh("replay_b");
  run_to("stability.json", a);
  run(load_config(a / "manifest.json"), b);
  CHECK(slurp(a / "samples.tsv") == slurp(b / "samples.tsv"));
  CHECK(compare(a, b, ToleranceSpec{}).breach() == false);
}

TEST_CASE("config errors map to exit status 2") {
  const fs::path bad = kScratch / "missing_partition.json";
  std::ofstream(bad) << R"({"experiment": "forward", "partition": "nowhere.json",
                            "conductivity": {"lambda": 4, "values": [1, 1]}})";
  Shell r = cli("run \"" + bad.string() + "\"");
  CHECK(r.code == 2);
  CHECK(r.err.rfind("error category=config-error kind=ConfigError message=", 0) == 0);
  CHECK(r.err.find('\n') == r.err.size() - 1);
  CHECK_THROWS_AS(load_config(bad), ConfigError);
  CHECK(cli("validate \"" + bad.string() + "\"").code == 2);
  CHECK(cli("validate \"" + (kConfigs / "survey.json").string() + "\"").code == 0);

  Json j = Json::parse(slurp(kConfigs / "stability.json"));
  j.erase("seed");
  CHECK_THROWS_AS(validate(parse_config(j, kConfigs)), ConfigError);
  j = Json::parse(slurp(kConfigs / "forward.json"));
  j["parameters"]["patern"] = 2;
  CHECK_THROWS_AS(validate(parse_config(j, kConfigs)), ConfigError);
  j = Json::parse(slurp(kConfigs / "forward.json"));
  j["experiment"] = "tomography";
  CHECK_THROWS_AS(parse_config(j, kConfigs), ConfigError);
  j = Json::parse(slurp(kConfigs / "forward.json"));
  j["conductivity"] = Json{{"lambda", 4}, {"values", {1.0, 9.0}}};
  CHECK_THROWS_AS(validate(parse_config(j, kConfigs)), AdmissibilityError);
}

TEST_CASE("numeric failures map to exit status 3") {
  const fs::path cfg = kScratch / "short_fit.json";
  std::ofstream(cfg) << R"({"experiment": "asymptotics", "parameters": {"radii": [0.01]}})";
  const Shell r = cli("run \"" + cfg.string() + "\" -o \"" + fresh("short_fit").string() + "\"");
  CHECK(r.code == 3);
  CHECK(r.err.rfind("error category=numeric-error kind=FitError", 0) == 0);
}

TEST_CASE("compare reports zero diffs, breaches and schema mismatches") {
  const fs::path a = fresh("cmp_a"), b = fresh("cmp_b"), f = fresh("cmp_f");
  run_to("dton.json", a);
  run_to("dton.json", b);
  run_to("forward.json", f);
  const CompareReport self = compare(a, a, parse_tolerance("0"));
  for (const auto& t : self.tables) {
    CHECK(t.max_abs == 0.0);
    CHECK(t.max_rel == 0.0);
  }
  CHECK(cli("compare \"" + a.string() + "\" \"" + b.string() + "\"").code == 0);

  // Bump one matrix entry in the candidate.
  std::string table = slurp(b / "dton.tsv");
  const auto row = table.find('\n') + 1;
  const auto cell = table.find('\t', row) + 1;
  table.insert(cell, "1");
  std::ofstream(b / "dton.tsv", std::ios::binary) << table;
  const CompareReport breached = compare(a, b, parse_tolerance("1e-9"));
  REQUIRE(breached.breach());
  CHECK(breached.tables[0].table == "dton.tsv");
  CHECK(breached.tables[0].row == 1);
  const Shell r = cli("compare \"" + a.string() + "\" \"" + b.string() + "\" --tol 1e-9");
  CHECK(r.code == 4);
  CHECK(r.err.rfind("error category=comparison-breach kind=ComparisonBreach", 0) == 0);
  // A loose per-table tolerance absorbs it.
  CHECK_FALSE(compare(a, b, parse_tolerance("1e-9,dton.tsv:abs=100")).breach());

  CHECK_THROWS_AS(compare(a, f, ToleranceSpec{}), SchemaMismatchError);
  CHECK(cli("compare \"" + a.string() + "\" \"" + f.string() + "\"").code == 2);
}

TEST_CASE("tolerance specs") {
  const ToleranceSpec s = parse_tolerance("abs=1e-12,rel=1e-8,oracle.tsv:rel=0.05");
  CHECK(s.fallback.abs == 1e-12);
  CHECK(s.fallback.rel == 1e-8);
  CHECK(s.for_table("oracle.tsv").rel == 0.05);
  CHECK(s.for_table("oracle.tsv").abs == 1e-12);
  CHECK(parse_tolerance("3e-4").fallback.abs == 3e-4);
  CHECK_THROWS_AS(parse_tolerance("tight"), ConfigError);
  CHECK_THROWS_AS(parse_tolerance("abs=-1"), ConfigError);
}

TEST_CASE("output directory override from the environment") {
  const fs::path dir = fresh("env_out");
  const Shell r = cli("run \"" + (kConfigs / "dton.json").string() + "\"",
                      "CALDERON_OUTPUT_DIR=\"" + dir.string() + "\"");
  CHECK(r.code == 0);
  CHECK(fs::exists(dir / "dton.tsv"));
}

TEST_CASE("partition and conductivity descriptions") {
  const PartitionSpec layered = partition_from_json(Json::parse(R"({"layered": {"layers": 3}})"));
  CHECK(layered.subdomains.size() == 3);
  const PartitionSpec earth = partition_from_json(
      Json::parse(R"({"layered_earth": {"half_width": 10, "depth": 5, "interfaces": [1, 2]}})"));
  CHECK(earth.subdomains.size() == 3);
  CHECK_FALSE(earth.enforce_apriori);
  CHECK_THROWS_AS(partition_from_json(Json::parse(R"({"vertices": []})")), ConfigError);

  const PiecewiseLinearConductivity g = conductivity_from_json(
      Json::parse(R"({"lambda": 4, "pieces": [{"a": 2, "A": [0.1, -0.2]}, {"a": 1}]})"));
  CHECK(g.num_pieces() == 2);
  CHECK(g.piece(1).A.y() == -0.2);
  const PiecewiseLinearConductivity back = conductivity_from_json(conductivity_to_json(g));
  CHECK(back.coefficients() == g.coefficients());
}
