// Command-line experiment runner: run, compare and validate.
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "calderon/errors.hpp"
#include "calderon/runner.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitBreach = 4;

std::string quoted(const std::string& text) {
  std::string out = "\"";
  for (char c : text) {
    if (c == '"' || c == '\\') out += '\\';
    out += (c == '\n' ? ' ' : c);
  }
  return out + "\"";
}

int report(const char* category, const std::string& kind, const std::string& message, int code) {
  std::cerr << "error category=" << category << " kind=" << kind << " message=" << quoted(message)
            << '\n';
  return code;
}

std::optional<std::filesystem::path> output_override(const std::string& flag) {
  if (!flag.empty()) return std::filesystem::path(flag);
  if (const char* env = std::getenv("CALDERON_OUTPUT_DIR"); env && *env) {
    return std::filesystem::path(env);
  }
  return std::nullopt;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"calderon: piecewise-linear conductivity experiments"};
  app.require_subcommand(1);

  std::string config_path, output_dir;
  auto* run = app.add_subcommand("run", "run the experiment described by a config or manifest");
  run->add_option("config", config_path, "config file (JSON)")->required();
  run->add_option("-o,--output-dir", output_dir, "override the output directory");

  std::string validate_path;
  auto* validate = app.add_subcommand("validate", "check a config without running it");
  validate->add_option("config", validate_path, "config file (JSON)")->required();

  std::string baseline, candidate, tol = "0";
  auto* compare = app.add_subcommand("compare", "diff the tables of two run directories");
  compare->add_option("baseline", baseline)->required();
  compare->add_option("candidate", candidate)->required();
  compare->add_option("--tol", tol, "e.g. 1e-9 or abs=1e-12,rel=1e-8,oracle.tsv:rel=0.05");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*run) {
      const calderon::RunConfig config = calderon::load_config(config_path);
      const calderon::RunResult result = calderon::run(config, output_override(output_dir));
      std::cout << "ok experiment=" << calderon::to_string(config.experiment)
                << " output=" << result.output_dir.string() << " tables=" << result.tables.size()
                << '\n';
      for (const auto& [key, value] : result.summary.items()) {
        if (value.is_primitive()) std::cout << "  " << key << " = " << value.dump() << '\n';
      }
      return kExitOk;
    }
    if (*validate) {
      const calderon::RunConfig config = calderon::load_config(validate_path);
      calderon::validate(config);
      std::cout << "ok experiment=" << calderon::to_string(config.experiment) << '\n';
      return kExitOk;
    }
    const calderon::CompareReport r =
        calderon::compare(baseline, candidate, calderon::parse_tolerance(tol));
    for (const auto& t : r.tables) {
      std::cout << "table=" << t.table << " max_abs=" << t.max_abs << " max_rel=" << t.max_rel
                << " status=" << (t.breach ? "breach" : "ok");
      if (t.breach) {
        std::cout << " row=" << t.row << " column=" << t.column << " baseline=" << t.baseline
                  << " candidate=" << t.candidate;
      }
      std::cout << '\n';
    }
    if (r.breach()) {
      for (const auto& t : r.tables) {
        if (t.breach) {
          return report("comparison-breach", "ComparisonBreach",
                        t.table + " row " + std::to_string(t.row) + " column " + t.column + ": " +
                            t.baseline + " vs " + t.candidate,
                        kExitBreach);
        }
      }
    }
    return kExitOk;
  } catch (const calderon::Error& e) {
    const int code = e.category() == calderon::ErrorCategory::kConfig      ? kExitConfig
                     : e.category() == calderon::ErrorCategory::kNumeric ? kExitNumeric
                                                                          : kExitBreach;
    return report(calderon::to_string(e.category()), e.kind(), e.what(), code);
  } catch (const std::exception& e) {
    return report("numeric-error", "InternalError", e.what(), kExitNumeric);
  }
}
