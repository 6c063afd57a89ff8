#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace qcseg {

using Vec3 = std::array<double, 3>;

/// Raw sensor output with (possibly jittered) timestamps in seconds.
struct TimestampedTriaxial {
  std::vector<double> timestamps;
  std::vector<Vec3> samples;  // m/s^2
};

/// Uniformly sampled three-axis acceleration.
struct TriaxialSeries {
  double rate = 0.0;  // Hz
  std::vector<Vec3> samples;

  std::size_t size() const { return samples.size(); }
};

enum class ScalarUnit { Magnitude, LogMagnitude, Energy, Raw };

std::string_view to_string(ScalarUnit unit);
ScalarUnit scalar_unit_from_string(std::string_view name);

/// Uniformly sampled one-dimensional feature. All segmentation models consume
/// this type.
struct ScalarSeries {
  double rate = 0.0;  // Hz
  std::vector<double> values;
  ScalarUnit unit = ScalarUnit::Raw;

  std::size_t size() const { return values.size(); }
};

struct SpectrumEstimate {
  std::vector<double> frequencies;  // Hz, increasing
  std::vector<double> power;        // >= 0
  std::string method;
  // Transform length behind a periodogram grid; 0 for closed-form spectra.
  std::size_t segment_length = 0;
};

/// Per-time discrete state indicators (0-based internally; files use 1-based)
/// plus optional per-time posterior rows.
struct StateSequence {
  std::vector<int> indicators;
  // Either empty or one row per time point, each row a simplex over the model's
  // state space.
  std::vector<std::vector<double>> posteriors;

  std::size_t size() const { return indicators.size(); }
  /// Number of distinct indicator values.
  int occupied() const;
};

enum class Adherence : std::uint8_t { Adherence = 1, Violation = 2 };

using AdherenceLabels = std::vector<Adherence>;

enum class TestKind { Walking, Balance, Voice };

std::string_view to_string(TestKind kind);
TestKind test_kind_from_string(std::string_view name);

}  // namespace qcseg
