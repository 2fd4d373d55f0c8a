#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace c2fpl {

enum class ErrorCode {
  invalid_argument,
  io,
  malformed_header,
  dimension_mismatch,
  non_finite,
  duplicate_id,
  invalid_data,
  missing_ground_truth,
  insufficient_data,
  degenerate_split,
  undefined_auc,
  numeric_failure,
};

// Process exit status for a code: 2 usage, 3 I/O, 4 data invariant,
// 5 numeric/degenerate.
int exit_code(ErrorCode code);
std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace c2fpl
