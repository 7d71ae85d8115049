#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace hamlab {

enum class ErrorCode {
  ZeroVector,
  DimensionTooSmall,
  ResonantWithinRange,
  EnumerationBudgetExceeded,
  DomainError,
  DegreeError,
  BasisNotOrthonormal,
  SamplingBudgetExceeded,
  FixedPointDiverged,
  SchemeUnavailable,
  StepTooLarge,
  BoundaryExit,
  SmallDivisorBelowTolerance,
  CutoffTooLarge,
  InsufficientData,
  InvalidModel,
  InvalidConfig,
};

inline const char* to_string(ErrorCode c) {
  switch (c) {
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::DimensionTooSmall: return "DimensionTooSmall";
    case ErrorCode::ResonantWithinRange: return "ResonantWithinRange";
    case ErrorCode::EnumerationBudgetExceeded: return "EnumerationBudgetExceeded";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::DegreeError: return "DegreeError";
    case ErrorCode::BasisNotOrthonormal: return "BasisNotOrthonormal";
    case ErrorCode::SamplingBudgetExceeded: return "SamplingBudgetExceeded";
    case ErrorCode::FixedPointDiverged: return "FixedPointDiverged";
    case ErrorCode::SchemeUnavailable: return "SchemeUnavailable";
    case ErrorCode::StepTooLarge: return "StepTooLarge";
    case ErrorCode::BoundaryExit: return "BoundaryExit";
    case ErrorCode::SmallDivisorBelowTolerance: return "SmallDivisorBelowTolerance";
    case ErrorCode::CutoffTooLarge: return "CutoffTooLarge";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::InvalidModel: return "InvalidModel";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

// Single exception type for the library. `witness` carries the offending
// integer vector when there is one (resonances, small divisors).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what, std::vector<long> witness = {})
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code),
        witness_(std::move(witness)) {}

  ErrorCode code() const noexcept { return code_; }
  const std::vector<long>& witness() const noexcept { return witness_; }

 private:
  ErrorCode code_;
  std::vector<long> witness_;
};

}  // namespace hamlab
