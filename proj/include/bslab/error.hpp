#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace bslab {

enum class ErrorKind {
  invalid_argument,
  degenerate_system,
  invalid_ratio,
  budget,
  evaluation,
  resolution,
  unknown_scenario,
  missing_parameter,
  dimension_mismatch,
  saturation,
  quadrature,
  prediction_unavailable,
  degenerate_kernel,
  sign_framing,
  support_too_large,
  solver,
  config,
  io,
};

inline constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_argument: return "invalid_argument";
    case ErrorKind::degenerate_system: return "degenerate_system";
    case ErrorKind::invalid_ratio: return "invalid_ratio";
    case ErrorKind::budget: return "budget";
    case ErrorKind::evaluation: return "evaluation";
    case ErrorKind::resolution: return "resolution";
    case ErrorKind::unknown_scenario: return "unknown_scenario";
    case ErrorKind::missing_parameter: return "missing_parameter";
    case ErrorKind::dimension_mismatch: return "dimension_mismatch";
    case ErrorKind::saturation: return "saturation";
    case ErrorKind::quadrature: return "quadrature";
    case ErrorKind::prediction_unavailable: return "prediction_unavailable";
    case ErrorKind::degenerate_kernel: return "degenerate_kernel";
    case ErrorKind::sign_framing: return "sign_framing";
    case ErrorKind::support_too_large: return "support_too_large";
    case ErrorKind::solver: return "solver";
    case ErrorKind::config: return "config";
    case ErrorKind::io: return "io";
  }
  return "unknown";
}

/// Every failure raised by the library carries a machine-readable kind so the
/// experiment runner can map it onto an exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool condition, ErrorKind kind, const std::string& what) {
  if (!condition) fail(kind, what);
}

}  // namespace bslab
