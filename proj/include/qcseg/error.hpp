#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace qcseg {

enum class ErrorCode {
  NonMonotonicTimestamps,
  TooFewSamples,
  NonPositiveFloor,
  EmptyInput,
  WindowLargerThanInput,
  CutoffAboveNyquist,
  ZeroFactor,
  SegmentTooLong,
  InvalidArgument,
  TooShort,
  NoConvergence,
  DegenerateComponent,
  TooFewPoints,
  EvenWindow,
  EqualMeans,
  WrongWindowLength,
  NumericalUnderflow,
  UnlabelledState,
  SingleClassTraining,
  EmptyDenominator,
  FoldTooSmall,
  InvalidSchedule,
  Io,
  Format,
};

std::string_view to_string(ErrorCode code);

// Every failure raised by the library carries one of the codes above so the
// CLI can map it to an exit status without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

  // True for errors caused by bad input or configuration rather than by the
  // numerics going wrong at runtime.
  bool is_validation() const noexcept;

 private:
  ErrorCode code_;
};

}  // namespace qcseg
