#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "calderon/conductivity.hpp"
#include "calderon/geometry.hpp"

namespace calderon {

using Json = nlohmann::ordered_json;

enum class ExperimentKind { kForward, kDtoN, kAsymptotics, kStability, kInversion, kSurvey, kBlowUp };

const char* to_string(ExperimentKind kind);
ExperimentKind parse_experiment_kind(const std::string& name);

/// One run. File references are resolved at load time and their content is
/// kept inline, so the echo in a manifest reproduces the run on its own.
struct RunConfig {
  ExperimentKind experiment = ExperimentKind::kForward;
  Json partition;                  // inline partition description, null when unused
  std::vector<Json> conductivities;
  double mesh_size = 0.1;
  std::optional<std::uint64_t> seed;
  std::string output_dir = "out";
  Json parameters = Json::object();
  std::filesystem::path base_dir;  // relative output paths resolve here

  Json to_json() const;
};

/// Partition descriptions: explicit polygons, or {"layered": {...}} /
/// {"layered_earth": {...}} generators.
PartitionSpec partition_from_json(const Json& j);
/// {"lambda", "resistivity", "pieces": [{"a", "A": [x, y]}]} or
/// {"lambda", "resistivity", "values": [...]} for piecewise constants.
PiecewiseLinearConductivity conductivity_from_json(const Json& j);
Json conductivity_to_json(const PiecewiseLinearConductivity& gamma);

/// Parses a config object. String values of "partition" and "conductivity"
/// are file paths relative to `base_dir`. A manifest is accepted in place of
/// a config and replays its echo.
RunConfig parse_config(const Json& j, const std::filesystem::path& base_dir);
RunConfig load_config(const std::filesystem::path& path);

/// Full static check: geometry, admissibility, experiment parameters.
void validate(const RunConfig& config);

struct RunResult {
  std::filesystem::path output_dir;
  std::vector<std::string> tables;
  Json summary;
  double wall_time = 0.0;
};

/// Runs the experiment and writes manifest.json, summary.tsv and the result
/// tables. `output_override` replaces config.output_dir.
RunResult run(const RunConfig& config,
              const std::optional<std::filesystem::path>& output_override = std::nullopt);

struct Tolerance {
  double abs = 0.0;
  double rel = 0.0;
};

/// "1e-9" (absolute), "abs=1e-12,rel=1e-8", with optional per-table
/// overrides "pseudo_section.tsv:rel=0.01".
struct ToleranceSpec {
  Tolerance fallback;
  std::map<std::string, Tolerance> per_table;

  const Tolerance& for_table(const std::string& table) const;
};
ToleranceSpec parse_tolerance(const std::string& text);

struct TableDiff {
  std::string table;
  double max_abs = 0.0;
  double max_rel = 0.0;
  bool breach = false;
  // Worst offending cell when breached.
  int row = -1;
  std::string column;
  std::string baseline;
  std::string candidate;
};

struct CompareReport {
  std::string experiment;
  std::vector<TableDiff> tables;
  bool breach() const;
};

/// Throws SchemaMismatchError when the manifests disagree on kind, tables,
/// headers or row counts.
CompareReport compare(const std::filesystem::path& baseline, const std::filesystem::path& candidate,
                      const ToleranceSpec& tolerance);

}  // namespace calderon
