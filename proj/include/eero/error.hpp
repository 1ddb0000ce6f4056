#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace eero {

enum class ErrorCode {
  // domain validation
  TooFewHeads,
  ShapeMismatch,
  NonIncreasingBudgets,
  RowNotNormalized,
  InvalidValue,
  MissingRisks,
  // calibration
  EmptyCalibration,
  NotOnSimplex,
  // allocation
  InfeasibleBudget,
  EqualBudgets,
  BudgetBelowMinimum,
  // inference
  HeadCountMismatch,
  LabelLengthMismatch,
  // oracle
  ResolutionTooCoarse,
  // synth
  InvalidSpec,
  // io
  FileNotFound,
  ParseError,
  IoError,
  MissingLabels,
  InvalidArgument,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure surfaced by the library carries exactly one ErrorCode.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace eero
