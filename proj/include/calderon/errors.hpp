#pragma once

#include <stdexcept>
#include <string>

namespace calderon {

/// Coarse classification used by the command-line runner to pick an exit code.
enum class ErrorCategory {
  kConfig,      // bad input: geometry, files, schema
  kNumeric,     // solver or fitting failure
  kComparison,  // regression comparison breach
};

const char* to_string(ErrorCategory category);

/// Base of every error raised by the library. `kind()` is the stable name
/// printed in machine-readable error lines.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message, ErrorCategory category)
      : std::runtime_error(message), kind_(std::move(kind)), category_(category) {}

  const std::string& kind() const noexcept { return kind_; }
  ErrorCategory category() const noexcept { return category_; }

 private:
  std::string kind_;
  ErrorCategory category_;
};

#define CALDERON_DEFINE_ERROR(Name, Category)                    \
  class Name : public Error {                                    \
   public:                                                       \
    explicit Name(const std::string& message)                    \
        : Error(#Name, message, ErrorCategory::Category) {}      \
  };

// geometry
CALDERON_DEFINE_ERROR(GeometryError, kConfig)
CALDERON_DEFINE_ERROR(OverlapError, kConfig)
CALDERON_DEFINE_ERROR(CoverageError, kConfig)
CALDERON_DEFINE_ERROR(FlatPortionError, kConfig)
CALDERON_DEFINE_ERROR(NoChainError, kConfig)
CALDERON_DEFINE_ERROR(MeshError, kConfig)
CALDERON_DEFINE_ERROR(PreconditionError, kConfig)
CALDERON_DEFINE_ERROR(ConfigError, kConfig)
CALDERON_DEFINE_ERROR(SchemaMismatchError, kConfig)

// conductivity
CALDERON_DEFINE_ERROR(OutsideDomainError, kConfig)
CALDERON_DEFINE_ERROR(AdmissibilityError, kConfig)
CALDERON_DEFINE_ERROR(SamplerError, kNumeric)

// fem, maps
CALDERON_DEFINE_ERROR(DegenerateTriangleError, kNumeric)
CALDERON_DEFINE_ERROR(SolverError, kNumeric)
CALDERON_DEFINE_ERROR(CompatibilityError, kNumeric)
CALDERON_DEFINE_ERROR(SingularMapError, kNumeric)
CALDERON_DEFINE_ERROR(MetricError, kNumeric)

// greens
CALDERON_DEFINE_ERROR(CoincidentPointsError, kNumeric)
CALDERON_DEFINE_ERROR(SourceTooCloseError, kConfig)
CALDERON_DEFINE_ERROR(ProbeInsideUError, kConfig)
CALDERON_DEFINE_ERROR(FitError, kNumeric)

// stability, inversion, survey
CALDERON_DEFINE_ERROR(RangeError, kConfig)
CALDERON_DEFINE_ERROR(DivergenceError, kNumeric)
CALDERON_DEFINE_ERROR(ElectrodeOffSigmaError, kConfig)

// cli
CALDERON_DEFINE_ERROR(ComparisonBreach, kComparison)

#undef CALDERON_DEFINE_ERROR

}  // namespace calderon
