#include "c2fpl/error.hpp"

namespace c2fpl {

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument:
      return 2;
    case ErrorCode::io:
      return 3;
    case ErrorCode::malformed_header:
    case ErrorCode::dimension_mismatch:
    case ErrorCode::non_finite:
    case ErrorCode::duplicate_id:
    case ErrorCode::invalid_data:
    case ErrorCode::missing_ground_truth:
      return 4;
    case ErrorCode::insufficient_data:
    case ErrorCode::degenerate_split:
    case ErrorCode::undefined_auc:
    case ErrorCode::numeric_failure:
      return 5;
  }
  return 1;
}

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::io: return "io";
    case ErrorCode::malformed_header: return "malformed_header";
    case ErrorCode::dimension_mismatch: return "dimension_mismatch";
    case ErrorCode::non_finite: return "non_finite";
    case ErrorCode::duplicate_id: return "duplicate_id";
    case ErrorCode::invalid_data: return "invalid_data";
    case ErrorCode::missing_ground_truth: return "missing_ground_truth";
    case ErrorCode::insufficient_data: return "insufficient_data";
    case ErrorCode::degenerate_split: return "degenerate_split";
    case ErrorCode::undefined_auc: return "undefined_auc";
    case ErrorCode::numeric_failure: return "numeric_failure";
  }
  return "unknown";
}

}  // namespace c2fpl
