#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace nilmodel {

enum class ErrorCode {
  NotUnimodular,
  HomomorphismViolation,
  LatticeNotPreserved,
  NonIntegerPeriods,
  BasepointInconsistency,
  NotCertified,
  NotEquivariant,
  NotHyperbolic,
  DegreeMismatch,
  NoConvergence,
  NewtonDiverged,
  PullbackFailed,
  SingularAtM,
  CountMismatch,
  ReductionDiverged,
  ChartRefinementFailed,
  NotCohomologous,
  InconsistentRotationField,
  NotFibered,
  NotContracting,
  InvalidConfig,
  IOError,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library carries one of the codes above so that
/// callers (and the pipeline's stage labels) can branch on it.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace nilmodel
