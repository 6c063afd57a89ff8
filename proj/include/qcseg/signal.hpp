#pragma once

#include <cstddef>
#include <span>

#include "qcseg/types.hpp"

namespace qcseg {

/// Resamples each axis onto a uniform grid with a not-a-knot cubic spline.
/// The grid starts at the first timestamp and never extends past the last
/// one. Needs at least four samples and strictly increasing timestamps.
TriaxialSeries interpolate_uniform(const TimestampedTriaxial& input, double target_rate);

/// Euclidean norm per sample.
ScalarSeries magnitude(const TriaxialSeries& input);

/// log10 of the Euclidean norm, clamped from below by `floor` (m/s^2).
ScalarSeries log_magnitude(const TriaxialSeries& input, double floor = 1e-6);

/// Root-sum-square (or sum of squares when `squared`) over non-overlapping
/// windows of `window` samples. A trailing partial window is dropped.
ScalarSeries windowed_energy(const ScalarSeries& input, std::size_t window, bool squared = false);

/// Order-4 Butterworth low-pass run forward then backward, so the response
/// has zero phase and segment boundaries stay where they were.
ScalarSeries lowpass_filter(const ScalarSeries& input, double cutoff_hz);

/// Keeps every `factor`-th sample starting at index 0. The caller is
/// responsible for band-limiting below the new Nyquist frequency first.
ScalarSeries downsample(const ScalarSeries& input, std::size_t factor);

enum class SpectralWindow { Hann, Rectangular };

struct WelchOptions {
  std::size_t segment_length = 0;  // 0 selects 4 s worth of samples
  double overlap = 0.5;
  SpectralWindow window = SpectralWindow::Hann;
  bool remove_mean = true;  // per segment
};

/// Welch-averaged periodogram on the one-sided grid k * rate / segment_length.
///
/// `power` is a two-sided density per unit of normalized frequency
/// (cycles/sample), the same scale as `ar_psd`: white noise of variance s2
/// gives a flat s2, and `integrated_power` recovers the series variance.
SpectrumEstimate power_spectrum(const ScalarSeries& input, const WelchOptions& options = {});

/// Integral of a one-sided `power_spectrum` result over the full two-sided
/// normalized band, i.e. the variance the spectrum accounts for.
double integrated_power(const SpectrumEstimate& spectrum);

/// Second-order section in transposed direct form II, a0 normalized to 1.
struct Biquad {
  double b0, b1, b2, a1, a2;
};

/// Bilinear-transform (prewarped) Butterworth low-pass as cascaded biquads.
std::vector<Biquad> butterworth_lowpass(int order, double cutoff_hz, double rate_hz);

/// Zero-phase application of a biquad cascade with odd-extension padding and
/// steady-state initial conditions.
std::vector<double> filtfilt(std::span<const Biquad> sections, std::span<const double> x);

}  // namespace qcseg
