#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace geoconsist {

enum class ErrorCode {
  InvalidArgument,
  AngleAtPi,
  BehindCamera,
  NonPositiveDepth,
  EmptyMask,
  DegenerateTranslation,
  EmptyMatchSet,
  ZeroSynthMean,
  DegenerateConfiguration,
  LengthMismatch,
  OverlapMismatch,
  ProjectionSingular,
  GridTooSmall,
  NonFiniteEvaluation,
  DivergenceDetected,
  NoIntersection,
  InsufficientVisibility,
  MalformedLine,
  IoFailure,
};

std::string_view to_string(ErrorCode code);

/// Single exception type for the library; callers dispatch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace geoconsist
