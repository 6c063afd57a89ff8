#include <algorithm>
#include <set>

#include "qcseg/error.hpp"
#include "qcseg/rng.hpp"
#include "qcseg/types.hpp"

namespace qcseg {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonMonotonicTimestamps: return "NonMonotonicTimestamps";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::NonPositiveFloor: return "NonPositiveFloor";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::WindowLargerThanInput: return "WindowLargerThanInput";
    case ErrorCode::CutoffAboveNyquist: return "CutoffAboveNyquist";
    case ErrorCode::ZeroFactor: return "ZeroFactor";
    case ErrorCode::SegmentTooLong: return "SegmentTooLong";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::TooShort: return "TooShort";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::DegenerateComponent: return "DegenerateComponent";
    case ErrorCode::TooFewPoints: return "TooFewPoints";
    case ErrorCode::EvenWindow: return "EvenWindow";
    case ErrorCode::EqualMeans: return "EqualMeans";
    case ErrorCode::WrongWindowLength: return "WrongWindowLength";
    case ErrorCode::NumericalUnderflow: return "NumericalUnderflow";
    case ErrorCode::UnlabelledState: return "UnlabelledState";
    case ErrorCode::SingleClassTraining: return "SingleClassTraining";
    case ErrorCode::EmptyDenominator: return "EmptyDenominator";
    case ErrorCode::FoldTooSmall: return "FoldTooSmall";
    case ErrorCode::InvalidSchedule: return "InvalidSchedule";
    case ErrorCode::Io: return "Io";
    case ErrorCode::Format: return "Format";
  }
  return "Unknown";
}

bool Error::is_validation() const noexcept {
  switch (code_) {
    case ErrorCode::NoConvergence:
    case ErrorCode::DegenerateComponent:
    case ErrorCode::NumericalUnderflow:
    case ErrorCode::EqualMeans:
    case ErrorCode::EmptyDenominator:
    case ErrorCode::Io:
      return false;
    default:
      return true;
  }
}

std::string_view to_string(ScalarUnit unit) {
  switch (unit) {
    case ScalarUnit::Magnitude: return "magnitude";
    case ScalarUnit::LogMagnitude: return "log-magnitude";
    case ScalarUnit::Energy: return "energy";
    case ScalarUnit::Raw: return "raw";
  }
  return "raw";
}

ScalarUnit scalar_unit_from_string(std::string_view name) {
  if (name == "magnitude") return ScalarUnit::Magnitude;
  if (name == "log-magnitude") return ScalarUnit::LogMagnitude;
  if (name == "energy") return ScalarUnit::Energy;
  if (name == "raw") return ScalarUnit::Raw;
  throw Error(ErrorCode::Format, "unknown unit tag '" + std::string(name) + "'");
}

std::string_view to_string(TestKind kind) {
  switch (kind) {
    case TestKind::Walking: return "walking";
    case TestKind::Balance: return "balance";
    case TestKind::Voice: return "voice";
  }
  return "walking";
}

TestKind test_kind_from_string(std::string_view name) {
  if (name == "walking") return TestKind::Walking;
  if (name == "balance") return TestKind::Balance;
  if (name == "voice") return TestKind::Voice;
  throw Error(ErrorCode::InvalidArgument, "unknown test kind '" + std::string(name) + "'");
}

int StateSequence::occupied() const {
  return static_cast<int>(std::set<int>(indicators.begin(), indicators.end()).size());
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t derive_seed(std::uint64_t root, std::string_view stream) {
  // splitmix64 finalizer over root xor stream hash
  std::uint64_t z = root ^ fnv1a64(stream);
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace qcseg
