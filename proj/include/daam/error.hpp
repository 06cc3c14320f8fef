#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace daam {

enum class ErrorCode {
  parse_error,
  validation_error,
  dimension_mismatch,
  infeasible_demand,
  all_singular,
  singular_daam,
  dimensionality,
  domain_error,
  branch_matching,
  io_error,
  usage_error,
  verification_failed,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::parse_error: return "parse_error";
    case ErrorCode::validation_error: return "validation_error";
    case ErrorCode::dimension_mismatch: return "dimension_mismatch";
    case ErrorCode::infeasible_demand: return "infeasible_demand";
    case ErrorCode::all_singular: return "all_singular";
    case ErrorCode::singular_daam: return "singular_daam";
    case ErrorCode::dimensionality: return "dimensionality";
    case ErrorCode::domain_error: return "domain_error";
    case ErrorCode::branch_matching: return "branch_matching";
    case ErrorCode::io_error: return "io_error";
    case ErrorCode::usage_error: return "usage_error";
    case ErrorCode::verification_failed: return "verification_failed";
  }
  return "unknown";
}

/// Process exit status for a failure of the given kind.
constexpr int exit_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::parse_error:
    case ErrorCode::validation_error:
    case ErrorCode::dimension_mismatch:
    case ErrorCode::io_error:
    case ErrorCode::usage_error:
    case ErrorCode::domain_error:
    case ErrorCode::dimensionality:
      return 2;
    case ErrorCode::infeasible_demand:
      return 3;
    case ErrorCode::verification_failed:
      return 4;
    case ErrorCode::all_singular:
    case ErrorCode::singular_daam:
    case ErrorCode::branch_matching:
      return 5;
  }
  return 5;
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace daam
