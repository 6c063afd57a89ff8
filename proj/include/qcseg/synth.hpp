#pragma once

#include <complex>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "qcseg/hdp_ar.hpp"
#include "qcseg/types.hpp"

namespace qcseg {

enum class Scenario { WalkingLike, BalanceLike, VoiceLike, SwitchingAr, GravityDrift, TwoCluster };

std::string_view to_string(Scenario s);
Scenario scenario_from_string(std::string_view name);

/// State `state` is active on [start, end) seconds.
struct RegimeSegment {
  int state = 0;
  double start = 0.0;
  double end = 0.0;
};

struct SynthSpec {
  Scenario scenario = Scenario::SwitchingAr;
  double duration = 60.0;  // s
  double rate = 30.0;      // Hz, sensor or audio rate
  // Must tile [0, duration]. Left empty, `make_spec` draws a seeded schedule.
  std::vector<RegimeSegment> schedule;
  double noise = 0.05;  // sensor noise standard deviation
  std::uint64_t seed = 0;

  double separation = 6.0;        // two-cluster: mean gap in noise standard deviations
  double drift = 1.0;             // gravity-drift: orientation change scale; 0 keeps gravity fixed
  double burst_amplitude = 1.0;   // gravity-drift: m/s^2 peak of each dynamic burst
  double keyframe_interval = 20;  // gravity-drift: seconds between gravity path corners
  bool jitter = false;            // timestamps perturbed by up to 30% of a sample period

  /// Throws InvalidSchedule unless the schedule tiles [0, duration] in order
  /// with positive-length segments, and InvalidArgument for bad rates.
  void validate() const;
  std::size_t samples() const;
};

/// Scenario defaults (durations, rates, noise) with a seeded schedule.
SynthSpec make_spec(Scenario scenario, std::uint64_t seed);

/// Index of the first sample at or after `seconds` on a grid of `rate`.
std::size_t sample_index(double seconds, double rate);

/// Per-sample state ids of a schedule on a uniform grid.
std::vector<int> schedule_states(const std::vector<RegimeSegment>& schedule, std::size_t samples, double rate);

/// State active at `seconds` (the last segment extends to +inf, the first to -inf).
int state_at(const std::vector<RegimeSegment>& schedule, double seconds);

/// AR coefficients whose characteristic polynomial has the given roots
/// (complex roots must come in conjugate pairs).
std::vector<double> ar_from_poles(const std::vector<std::complex<double>>& poles);

/// AR(4) with a resonance at `peak_hz`: two conjugate pole pairs at the same
/// angle and radii 0.95 and 0.7, unit stationary mean scaled by `mean`.
ArState periodic_ar_state(double peak_hz, double rate, double mean, double variance);

/// Three well separated AR(1) regimes.
std::vector<ArState> default_switching_states();

SimulatedPath gen_switching_ar(const SynthSpec& spec, const std::vector<ArState>& states);

struct GravityDriftData {
  TimestampedTriaxial raw;
  std::vector<Vec3> gravity;  // true trend at each raw timestamp
  std::vector<Vec3> dynamic;  // true dynamic component at each raw timestamp
};

/// Piecewise-linear gravity path (|g| about 9.81) plus 3 Hz dynamic bursts
/// where the schedule state is non-zero plus Gaussian noise.
GravityDriftData gen_gravity_drift(const SynthSpec& spec);

struct TwoClusterData {
  ScalarSeries series;
  AdherenceLabels labels;
};

/// Blockwise-constant classes: state 0 is adherence with mean
/// separation * noise, any other state is violation with mean 0.
TwoClusterData gen_two_cluster(const SynthSpec& spec);

/// A synthetic test recording and its ground truth.
struct SynthRecording {
  TestKind kind = TestKind::Walking;
  TimestampedTriaxial accel;  // walking and balance
  ScalarSeries audio;         // voice
  std::vector<RegimeSegment> schedule;
  std::vector<std::string> behaviours;  // state id -> behaviour name
  std::vector<Adherence> adherence;     // state id -> label

  AdherenceLabels labels_at(const std::vector<double>& times) const;
  std::vector<std::string> behaviours_at(const std::vector<double>& times) const;
};

/// Walking-, balance- and voice-like scenarios.
SynthRecording gen_recording(const SynthSpec& spec);

}  // namespace qcseg
