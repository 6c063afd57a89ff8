#include "qcseg/signal.hpp"

#include <fftw3.h>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <complex>
#include <mutex>
#include <numbers>

#include "qcseg/error.hpp"

namespace qcseg {

namespace {

void require_rate(double rate) {
  if (!(rate > 0.0) || !std::isfinite(rate)) {
    throw Error(ErrorCode::InvalidArgument, "sample rate must be positive and finite");
  }
}

double norm3(const Vec3& v) { return std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]); }

// Second derivatives of the not-a-knot cubic spline through (t, y) for each
// of the supplied ordinate columns.
Eigen::MatrixXd spline_second_derivatives(const std::vector<double>& t, const Eigen::MatrixXd& y) {
  const Eigen::Index n = static_cast<Eigen::Index>(t.size());
  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(static_cast<std::size_t>(3 * n));
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n, y.cols());

  auto h = [&](Eigen::Index i) { return t[i + 1] - t[i]; };

  // Third derivative continuous across the second and penultimate knots.
  entries.emplace_back(0, 0, h(1));
  entries.emplace_back(0, 1, -(h(0) + h(1)));
  entries.emplace_back(0, 2, h(0));
  for (Eigen::Index i = 1; i < n - 1; ++i) {
    entries.emplace_back(i, i - 1, h(i - 1));
    entries.emplace_back(i, i, 2.0 * (h(i - 1) + h(i)));
    entries.emplace_back(i, i + 1, h(i));
    rhs.row(i) = 6.0 * ((y.row(i + 1) - y.row(i)) / h(i) - (y.row(i) - y.row(i - 1)) / h(i - 1));
  }
  entries.emplace_back(n - 1, n - 3, h(n - 2));
  entries.emplace_back(n - 1, n - 2, -(h(n - 3) + h(n - 2)));
  entries.emplace_back(n - 1, n - 1, h(n - 3));

  Eigen::SparseMatrix<double> a(n, n);
  a.setFromTriplets(entries.begin(), entries.end());
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(a);
  if (lu.info() != Eigen::Success) {
    throw Error(ErrorCode::NumericalUnderflow, "spline system is singular");
  }
  return lu.solve(rhs);
}

std::mutex& fftw_plan_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

TriaxialSeries interpolate_uniform(const TimestampedTriaxial& input, double target_rate) {
  require_rate(target_rate);
  const auto& t = input.timestamps;
  if (t.size() != input.samples.size()) {
    throw Error(ErrorCode::InvalidArgument, "timestamps and samples differ in length");
  }
  if (t.size() < 4) {
    throw Error(ErrorCode::TooFewSamples, "cubic spline needs at least 4 samples, got " +
                                              std::to_string(t.size()));
  }
  for (std::size_t i = 1; i < t.size(); ++i) {
    if (!(t[i] > t[i - 1])) {
      throw Error(ErrorCode::NonMonotonicTimestamps,
                  "timestamp " + std::to_string(i) + " does not increase");
    }
  }

  const Eigen::Index n = static_cast<Eigen::Index>(t.size());
  Eigen::MatrixXd y(n, 3);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int a = 0; a < 3; ++a) y(i, a) = input.samples[static_cast<std::size_t>(i)][a];
  }
  const Eigen::MatrixXd m = spline_second_derivatives(t, y);

  const double span = t.back() - t.front();
  // Tolerance keeps a grid point that lands on the last knot up to rounding.
  const auto count = static_cast<std::size_t>(std::floor(span * target_rate + 1e-9)) + 1;

  TriaxialSeries out;
  out.rate = target_rate;
  out.samples.resize(count);
  std::size_t seg = 0;
  for (std::size_t k = 0; k < count; ++k) {
    const double x = std::min(t.front() + static_cast<double>(k) / target_rate, t.back());
    while (seg + 2 < t.size() && x > t[seg + 1]) ++seg;
    const double hi = t[seg + 1] - t[seg];
    const double left = t[seg + 1] - x;
    const double right = x - t[seg];
    const auto i = static_cast<Eigen::Index>(seg);
    for (int a = 0; a < 3; ++a) {
      out.samples[k][a] = m(i, a) * left * left * left / (6.0 * hi) +
                          m(i + 1, a) * right * right * right / (6.0 * hi) +
                          (y(i, a) / hi - m(i, a) * hi / 6.0) * left +
                          (y(i + 1, a) / hi - m(i + 1, a) * hi / 6.0) * right;
    }
  }
  return out;
}

ScalarSeries magnitude(const TriaxialSeries& input) {
  require_rate(input.rate);
  ScalarSeries out{input.rate, {}, ScalarUnit::Magnitude};
  out.values.reserve(input.size());
  for (const auto& v : input.samples) out.values.push_back(norm3(v));
  return out;
}

ScalarSeries log_magnitude(const TriaxialSeries& input, double floor) {
  if (!(floor > 0.0)) throw Error(ErrorCode::NonPositiveFloor, "log floor must be > 0");
  require_rate(input.rate);
  ScalarSeries out{input.rate, {}, ScalarUnit::LogMagnitude};
  out.values.reserve(input.size());
  for (const auto& v : input.samples) out.values.push_back(std::log10(std::max(norm3(v), floor)));
  return out;
}

ScalarSeries windowed_energy(const ScalarSeries& input, std::size_t window, bool squared) {
  require_rate(input.rate);
  if (input.values.empty()) throw Error(ErrorCode::EmptyInput, "no samples to window");
  if (window == 0) throw Error(ErrorCode::InvalidArgument, "window must be >= 1");
  if (window > input.size()) {
    throw Error(ErrorCode::WindowLargerThanInput,
                "window " + std::to_string(window) + " exceeds " + std::to_string(input.size()));
  }
  ScalarSeries out{input.rate / static_cast<double>(window), {}, ScalarUnit::Energy};
  const std::size_t frames = input.size() / window;
  out.values.reserve(frames);
  for (std::size_t f = 0; f < frames; ++f) {
    double sum = 0.0;
    for (std::size_t i = f * window; i < (f + 1) * window; ++i) sum += input.values[i] * input.values[i];
    out.values.push_back(squared ? sum : std::sqrt(sum));
  }
  return out;
}

std::vector<Biquad> butterworth_lowpass(int order, double cutoff_hz, double rate_hz) {
  require_rate(rate_hz);
  if (order < 2 || order % 2 != 0) {
    throw Error(ErrorCode::InvalidArgument, "Butterworth order must be even and >= 2");
  }
  if (!(cutoff_hz > 0.0)) throw Error(ErrorCode::InvalidArgument, "cutoff must be > 0");
  if (!(cutoff_hz < rate_hz / 2.0)) {
    throw Error(ErrorCode::CutoffAboveNyquist, "cutoff " + std::to_string(cutoff_hz) +
                                                   " Hz is not below Nyquist " +
                                                   std::to_string(rate_hz / 2.0) + " Hz");
  }
  const double k = std::tan(std::numbers::pi * cutoff_hz / rate_hz);
  std::vector<Biquad> sections;
  for (int i = 0; i < order / 2; ++i) {
    const double q = 1.0 / (2.0 * std::cos(std::numbers::pi * (2 * i + 1) / (2.0 * order)));
    const double norm = 1.0 / (1.0 + k / q + k * k);
    const double b0 = k * k * norm;
    sections.push_back({b0, 2.0 * b0, b0, 2.0 * (k * k - 1.0) * norm, (1.0 - k / q + k * k) * norm});
  }
  return sections;
}

namespace {

void run_cascade(std::span<const Biquad> sections, std::vector<double>& x) {
  if (x.empty()) return;
  double level = x.front();
  for (const auto& s : sections) {
    // Steady-state state for a constant input equal to `level`.
    const double gain = (s.b0 + s.b1 + s.b2) / (1.0 + s.a1 + s.a2);
    double z2 = (s.b2 - s.a2 * gain) * level;
    double z1 = (s.b1 - s.a1 * gain) * level + z2;
    for (double& v : x) {
      const double in = v;
      const double out = s.b0 * in + z1;
      z1 = s.b1 * in - s.a1 * out + z2;
      z2 = s.b2 * in - s.a2 * out;
      v = out;
    }
    level *= gain;
  }
}

}  // namespace

std::vector<double> filtfilt(std::span<const Biquad> sections, std::span<const double> x) {
  const std::size_t n = x.size();
  if (n == 0) return {};
  const std::size_t pad = std::min<std::size_t>(n - 1, 3 * (2 * sections.size() + 1));
  std::vector<double> ext;
  ext.reserve(n + 2 * pad);
  for (std::size_t i = pad; i >= 1; --i) ext.push_back(2.0 * x[0] - x[i]);
  ext.insert(ext.end(), x.begin(), x.end());
  for (std::size_t i = 1; i <= pad; ++i) ext.push_back(2.0 * x[n - 1] - x[n - 1 - i]);

  run_cascade(sections, ext);
  std::reverse(ext.begin(), ext.end());
  run_cascade(sections, ext);
  std::reverse(ext.begin(), ext.end());
  return {ext.begin() + static_cast<std::ptrdiff_t>(pad),
          ext.begin() + static_cast<std::ptrdiff_t>(pad + n)};
}

ScalarSeries lowpass_filter(const ScalarSeries& input, double cutoff_hz) {
  const auto sections = butterworth_lowpass(4, cutoff_hz, input.rate);
  ScalarSeries out{input.rate, filtfilt(sections, input.values), input.unit};
  return out;
}

ScalarSeries downsample(const ScalarSeries& input, std::size_t factor) {
  if (factor == 0) throw Error(ErrorCode::ZeroFactor, "decimation factor must be >= 1");
  require_rate(input.rate);
  ScalarSeries out{input.rate / static_cast<double>(factor), {}, input.unit};
  out.values.reserve(input.size() / factor + 1);
  for (std::size_t i = 0; i < input.size(); i += factor) out.values.push_back(input.values[i]);
  return out;
}

SpectrumEstimate power_spectrum(const ScalarSeries& input, const WelchOptions& options) {
  require_rate(input.rate);
  const std::size_t n = input.size();
  if (n < 2) throw Error(ErrorCode::EmptyInput, "power spectrum needs at least 2 samples");
  std::size_t seg = options.segment_length;
  if (seg == 0) {
    seg = std::min(n, static_cast<std::size_t>(std::lround(4.0 * input.rate)));
  } else if (seg > n) {
    throw Error(ErrorCode::SegmentTooLong,
                "segment " + std::to_string(seg) + " exceeds series length " + std::to_string(n));
  }
  if (seg < 2) throw Error(ErrorCode::InvalidArgument, "segment length must be >= 2");
  if (!(options.overlap >= 0.0 && options.overlap < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "overlap must lie in [0, 1)");
  }
  const std::size_t hop =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(seg * (1.0 - options.overlap))));

  std::vector<double> window(seg, 1.0);
  if (options.window == SpectralWindow::Hann) {
    // Periodic Hann, as used for spectral estimation.
    for (std::size_t i = 0; i < seg; ++i) {
      window[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / seg);
    }
  }
  double window_energy = 0.0;
  for (double w : window) window_energy += w * w;

  const std::size_t bins = seg / 2 + 1;
  std::vector<double> buffer(seg);
  std::vector<std::complex<double>> spectrum(bins);
  fftw_plan plan;
  {
    std::lock_guard lock(fftw_plan_mutex());
    plan = fftw_plan_dft_r2c_1d(static_cast<int>(seg), buffer.data(),
                                reinterpret_cast<fftw_complex*>(spectrum.data()), FFTW_ESTIMATE);
  }

  std::vector<double> accum(bins, 0.0);
  std::size_t segments = 0;
  for (std::size_t start = 0; start + seg <= n; start += hop) {
    double mean = 0.0;
    if (options.remove_mean) {
      for (std::size_t i = 0; i < seg; ++i) mean += input.values[start + i];
      mean /= static_cast<double>(seg);
    }
    for (std::size_t i = 0; i < seg; ++i) buffer[i] = (input.values[start + i] - mean) * window[i];
    fftw_execute(plan);
    for (std::size_t k = 0; k < bins; ++k) accum[k] += std::norm(spectrum[k]);
    ++segments;
  }
  {
    std::lock_guard lock(fftw_plan_mutex());
    fftw_destroy_plan(plan);
  }

  SpectrumEstimate out;
  out.method = options.window == SpectralWindow::Hann ? "welch-hann" : "welch-rectangular";
  out.segment_length = seg;
  out.frequencies.resize(bins);
  out.power.resize(bins);
  for (std::size_t k = 0; k < bins; ++k) {
    out.frequencies[k] = static_cast<double>(k) * input.rate / static_cast<double>(seg);
    out.power[k] = accum[k] / (window_energy * static_cast<double>(segments));
  }
  return out;
}

double integrated_power(const SpectrumEstimate& spectrum) {
  const std::size_t seg = spectrum.segment_length;
  const std::size_t bins = spectrum.power.size();
  if (seg == 0 || bins != seg / 2 + 1) {
    throw Error(ErrorCode::InvalidArgument, "integrated_power needs a periodogram grid");
  }
  const bool even = seg % 2 == 0;
  double total = spectrum.power[0];
  for (std::size_t k = 1; k < bins; ++k) {
    total += (even && k == bins - 1) ? spectrum.power[k] : 2.0 * spectrum.power[k];
  }
  return total / static_cast<double>(seg);
}

}  // namespace qcseg
