#pragma once

#include <stdexcept>
#include <string>

namespace hawkesbin {

/// Machine-readable failure category. `io` and `parse` concern reading or
/// writing external files; everything else is a domain failure.
enum class ErrorCode {
  invalid_parameter,
  window_too_short,
  invalid_order,
  underdetermined,
  singular_design,
  rejected_spec,
  degenerate_residual_covariance,
  selection_failed,
  insufficient_events,
  evaluation_error,
  io,
  parse,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_parameter: return "invalid-parameter";
    case ErrorCode::window_too_short: return "window-too-short";
    case ErrorCode::invalid_order: return "invalid-order";
    case ErrorCode::underdetermined: return "underdetermined";
    case ErrorCode::singular_design: return "singular-design";
    case ErrorCode::rejected_spec: return "rejected-spec";
    case ErrorCode::degenerate_residual_covariance:
      return "degenerate-residual-covariance";
    case ErrorCode::selection_failed: return "selection-failed";
    case ErrorCode::insufficient_events: return "insufficient-events";
    case ErrorCode::evaluation_error: return "evaluation-error";
    case ErrorCode::io: return "io";
    case ErrorCode::parse: return "parse";
  }
  return "unknown";
}

/// Thrown by every operation in this library on contract violation.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) fail(code, message);
}

}  // namespace hawkesbin
