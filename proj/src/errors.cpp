#include "calderon/errors.hpp"

namespace calderon {

const char* to_string(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::kConfig:
      return "config-error";
    case ErrorCategory::kNumeric:
      return "numeric-error";
    case ErrorCategory::kComparison:
      return "comparison-breach";
  }
  return "unknown";
}

}  // namespace calderon
