#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace maskrisk {

enum class ErrorCode {
  InvalidSpec,
  NonPositiveDefinite,
  MissingSpike,
  EigendecompositionUnavailable,
  EmptyTargetSet,
  DegenerateInput,
  ZeroMatrix,
  DivisionByZero,
  AtPhaseTransition,
  NoSolution,
  BracketExhausted,
  SingularConditioning,
  NotAnEigenvector,
  TooManySkips,
  UnknownPreset,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every recoverable failure in the library surfaces as this exception; the
/// code lets callers (the sweep driver, the CLI) map it onto skip or exit
/// behaviour without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace maskrisk
