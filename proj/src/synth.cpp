#include "qcseg/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "qcseg/error.hpp"
#include "qcseg/rng.hpp"

namespace qcseg {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kGravity = 9.81;

Vec3 add(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
Vec3 scale(const Vec3& a, double s) { return {a[0] * s, a[1] * s, a[2] * s}; }
double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

Vec3 normalized(const Vec3& a) {
  const double n = std::sqrt(dot(a, a));
  return n > 0.0 ? scale(a, 1.0 / n) : Vec3{0.0, 0.0, 1.0};
}

Vec3 random_unit(Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  return normalized({n(rng), n(rng), n(rng)});
}

// Unit vector orthogonal to `a`.
Vec3 orthogonal(const Vec3& a) {
  const Vec3 helper = std::abs(a[0]) < 0.9 ? Vec3{1.0, 0.0, 0.0} : Vec3{0.0, 1.0, 0.0};
  return normalized(add(helper, scale(a, -dot(helper, a))));
}

// Alternating blocks with lengths drawn uniformly from the per-state ranges,
// following `next` to choose each state. The final block is clipped to the
// duration and merged into its predecessor when shorter than `min_tail`.
template <typename Next>
std::vector<RegimeSegment> draw_schedule(double duration, int first_state,
                                         const std::vector<std::pair<double, double>>& lengths, Next next,
                                         Rng& rng, double min_tail = 1.0) {
  std::vector<RegimeSegment> out;
  double t = 0.0;
  int state = first_state;
  while (t < duration) {
    const auto [lo, hi] = lengths[static_cast<std::size_t>(state)];
    std::uniform_real_distribution<double> len(lo, hi);
    double end = std::min(duration, t + len(rng));
    if (duration - end < min_tail) end = duration;
    out.push_back({state, t, end});
    t = end;
    state = next(state, rng);
  }
  return out;
}

class GravityPath {
 public:
  void push(double t, const Vec3& g) {
    times_.push_back(t);
    values_.push_back(g);
  }

  Vec3 at(double t) const {
    if (t <= times_.front()) return values_.front();
    if (t >= times_.back()) return values_.back();
    const auto it = std::upper_bound(times_.begin(), times_.end(), t);
    const auto i = static_cast<std::size_t>(it - times_.begin());
    const double w = (t - times_[i - 1]) / (times_[i] - times_[i - 1]);
    // Increment form, so equal keyframes give exactly the keyframe value.
    return add(values_[i - 1], scale(add(values_[i], scale(values_[i - 1], -1.0)), w));
  }

 private:
  std::vector<double> times_;
  std::vector<Vec3> values_;
};

// Gravity keyframes at the given times: a random walk of the device
// orientation with step size `step(t)` radians (roughly).
template <typename Step>
GravityPath random_gravity_path(std::vector<double> times, Step step, Rng& rng) {
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  std::normal_distribution<double> n(0.0, 1.0);
  GravityPath path;
  Vec3 dir = normalized({0.15 * n(rng), 1.0, 0.3 + 0.15 * n(rng)});
  for (double t : times) {
    const double s = step(t);
    if (s > 0.0) dir = normalized(add(dir, {s * n(rng), s * n(rng), s * n(rng)}));
    path.push(t, scale(dir, kGravity));
  }
  return path;
}

std::vector<double> sample_times(std::size_t n, double rate, bool jitter, Rng& rng) {
  std::vector<double> t(n);
  std::uniform_real_distribution<double> j(-0.3, 0.3);
  for (std::size_t i = 0; i < n; ++i) {
    t[i] = static_cast<double>(i) / rate;
    if (jitter && i > 0) t[i] += j(rng) / rate;
  }
  return t;
}

}  // namespace

std::string_view to_string(Scenario s) {
  switch (s) {
    case Scenario::WalkingLike: return "walking-like";
    case Scenario::BalanceLike: return "balance-like";
    case Scenario::VoiceLike: return "voice-like";
    case Scenario::SwitchingAr: return "switching-ar";
    case Scenario::GravityDrift: return "gravity-drift";
    case Scenario::TwoCluster: return "two-cluster";
  }
  return "unknown";
}

Scenario scenario_from_string(std::string_view name) {
  for (Scenario s : {Scenario::WalkingLike, Scenario::BalanceLike, Scenario::VoiceLike, Scenario::SwitchingAr,
                     Scenario::GravityDrift, Scenario::TwoCluster}) {
    if (to_string(s) == name) return s;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown scenario '" + std::string(name) + "'");
}

void SynthSpec::validate() const {
  if (!(rate > 0.0) || !std::isfinite(rate)) throw Error(ErrorCode::InvalidArgument, "rate must be > 0");
  if (!(duration > 0.0) || !std::isfinite(duration)) {
    throw Error(ErrorCode::InvalidArgument, "duration must be > 0");
  }
  if (!(noise >= 0.0)) throw Error(ErrorCode::InvalidArgument, "noise must be >= 0");
  if (schedule.empty()) throw Error(ErrorCode::InvalidSchedule, "schedule is empty");
  constexpr double tol = 1e-9;
  if (std::abs(schedule.front().start) > tol) {
    throw Error(ErrorCode::InvalidSchedule, "schedule must start at 0");
  }
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    const auto& s = schedule[i];
    if (s.state < 0) throw Error(ErrorCode::InvalidSchedule, "negative state id");
    if (!(s.end > s.start)) {
      throw Error(ErrorCode::InvalidSchedule, "segment " + std::to_string(i) + " has non-positive length");
    }
    if (i > 0 && std::abs(s.start - schedule[i - 1].end) > tol) {
      throw Error(ErrorCode::InvalidSchedule,
                  "segment " + std::to_string(i) + " does not start where the previous one ends");
    }
  }
  if (std::abs(schedule.back().end - duration) > tol) {
    throw Error(ErrorCode::InvalidSchedule, "schedule must end at the duration");
  }
}

std::size_t SynthSpec::samples() const {
  return static_cast<std::size_t>(std::llround(duration * rate));
}

std::size_t sample_index(double seconds, double rate) {
  return static_cast<std::size_t>(std::max(0.0, std::ceil(seconds * rate - 1e-9)));
}

std::vector<int> schedule_states(const std::vector<RegimeSegment>& schedule, std::size_t samples, double rate) {
  std::vector<int> z(samples, schedule.empty() ? 0 : schedule.back().state);
  for (const auto& s : schedule) {
    const std::size_t a = std::min(samples, sample_index(s.start, rate));
    const std::size_t b = std::min(samples, sample_index(s.end, rate));
    std::fill(z.begin() + static_cast<std::ptrdiff_t>(a), z.begin() + static_cast<std::ptrdiff_t>(b), s.state);
  }
  return z;
}

int state_at(const std::vector<RegimeSegment>& schedule, double seconds) {
  if (schedule.empty()) throw Error(ErrorCode::InvalidSchedule, "schedule is empty");
  const auto it = std::upper_bound(schedule.begin(), schedule.end(), seconds,
                                   [](double t, const RegimeSegment& s) { return t < s.start; });
  if (it == schedule.begin()) return schedule.front().state;
  return std::prev(it)->state;
}

std::vector<double> ar_from_poles(const std::vector<std::complex<double>>& poles) {
  // prod_k (1 - p_k B) = 1 - sum_j A_j B^j
  std::vector<std::complex<double>> c{1.0};
  for (const auto& p : poles) {
    std::vector<std::complex<double>> next(c.size() + 1, 0.0);
    for (std::size_t i = 0; i < c.size(); ++i) {
      next[i] += c[i];
      next[i + 1] -= p * c[i];
    }
    c = std::move(next);
  }
  std::vector<double> a;
  for (std::size_t j = 1; j < c.size(); ++j) a.push_back(-c[j].real());
  return a;
}

ArState periodic_ar_state(double peak_hz, double rate, double mean, double variance) {
  const double w = kTwoPi * peak_hz / rate;
  const auto p1 = std::polar(0.95, w), p2 = std::polar(0.7, w);
  ArState s;
  s.coefficients = ar_from_poles({p1, std::conj(p1), p2, std::conj(p2)});
  double sum = 0.0;
  for (double a : s.coefficients) sum += a;
  s.mean = mean * (1.0 - sum);
  s.variance = variance;
  return s;
}

std::vector<ArState> default_switching_states() {
  std::vector<ArState> s(3);
  s[0].coefficients = {0.9};
  s[0].mean = 0.0;
  s[0].variance = 0.1;
  s[1].coefficients = {-0.5};
  s[1].mean = 3.0;
  s[1].variance = 0.5;
  s[2].coefficients = {0.3};
  s[2].mean = -1.4;
  s[2].variance = 0.05;
  return s;
}

SynthSpec make_spec(Scenario scenario, std::uint64_t seed) {
  SynthSpec spec;
  spec.scenario = scenario;
  spec.seed = seed;
  Rng rng = make_rng(seed, "synth-schedule");
  std::uniform_int_distribution<int> coin(0, 1);
  switch (scenario) {
    case Scenario::SwitchingAr: {
      spec.duration = 200.0;
      spec.rate = 30.0;
      spec.schedule = draw_schedule(spec.duration, 0, {{10, 25}, {10, 25}, {10, 25}},
                                    [&](int s, Rng& r) { return (s + 1 + std::uniform_int_distribution<int>(0, 1)(r)) % 3; },
                                    rng);
      break;
    }
    case Scenario::GravityDrift: {
      spec.duration = 60.0;
      spec.rate = 120.0;
      spec.noise = 0.05;
      spec.schedule = draw_schedule(spec.duration, 0, {{6, 10}, {2, 4}}, [](int s, Rng&) { return 1 - s; }, rng);
      break;
    }
    case Scenario::TwoCluster: {
      spec.duration = 120.0;
      spec.rate = 30.0;
      spec.noise = 1.0;
      spec.schedule = draw_schedule(spec.duration, 0, {{5, 15}, {5, 15}}, [](int s, Rng&) { return 1 - s; }, rng);
      break;
    }
    case Scenario::WalkingLike: {
      // 0 walking, 1 standing, 2 handling the phone
      spec.duration = 300.0;
      spec.rate = 100.0;
      spec.noise = 0.1;
      spec.jitter = true;
      spec.schedule = draw_schedule(
          spec.duration, 1, {{8, 20}, {4, 10}, {4, 10}},
          [&](int s, Rng& r) { return s == 0 ? 1 + std::uniform_int_distribution<int>(0, 1)(r) : 0; }, rng);
      break;
    }
    case Scenario::BalanceLike: {
      // 0 standing still, 1 moving, 2 buzzer
      spec.duration = 120.0;
      spec.rate = 100.0;
      spec.noise = 0.02;
      spec.schedule = {{2, 0.0, 2.0}};
      auto rest = draw_schedule(spec.duration - 2.0, 0, {{10, 25}, {3, 8}}, [](int s, Rng&) { return 1 - s; }, rng);
      for (auto seg : rest) spec.schedule.push_back({seg.state, seg.start + 2.0, seg.end + 2.0});
      spec.schedule.back().end = spec.duration;
      break;
    }
    case Scenario::VoiceLike: {
      // 0 phonation, 1 silence, 2 breath
      spec.duration = 20.0;
      spec.rate = 44100.0;
      spec.noise = 0.003;
      std::uniform_real_distribution<double> lead(1.0, 2.0);
      spec.schedule = {{1, 0.0, lead(rng)}};
      auto rest = draw_schedule(
          spec.duration - spec.schedule[0].end, 0, {{4, 8}, {1, 2}, {0.5, 1.5}},
          [&](int s, Rng& r) { return s == 0 ? 1 + coin(r) : 0; }, rng, 0.5);
      const double offset = spec.schedule[0].end;
      for (auto seg : rest) spec.schedule.push_back({seg.state, seg.start + offset, seg.end + offset});
      spec.schedule.back().end = spec.duration;
      break;
    }
  }
  return spec;
}

SimulatedPath gen_switching_ar(const SynthSpec& spec, const std::vector<ArState>& states) {
  spec.validate();
  for (const auto& s : spec.schedule) {
    if (static_cast<std::size_t>(s.state) >= states.size()) {
      throw Error(ErrorCode::InvalidSchedule, "schedule refers to state " + std::to_string(s.state) +
                                                  " but only " + std::to_string(states.size()) + " exist");
    }
  }
  SimulatedPath out;
  out.truth.indicators = schedule_states(spec.schedule, spec.samples(), spec.rate);
  Rng rng = make_rng(spec.seed, "synth-switching-ar");
  out.series = ScalarSeries{spec.rate, simulate_along(states, out.truth.indicators, rng), ScalarUnit::Raw};
  return out;
}

GravityDriftData gen_gravity_drift(const SynthSpec& spec) {
  spec.validate();
  if (!(spec.keyframe_interval > 0.0)) throw Error(ErrorCode::InvalidArgument, "keyframe interval must be > 0");
  Rng rng = make_rng(spec.seed, "synth-gravity-drift");
  std::normal_distribution<double> n(0.0, 1.0);

  std::vector<double> keys;
  for (double t = 0.0; t < spec.duration; t += spec.keyframe_interval) keys.push_back(t);
  keys.push_back(spec.duration);
  const GravityPath path = random_gravity_path(keys, [&](double) { return 0.3 * spec.drift; }, rng);

  std::vector<Vec3> axes;
  for (std::size_t i = 0; i < spec.schedule.size(); ++i) axes.push_back(random_unit(rng));

  GravityDriftData out;
  out.raw.timestamps = sample_times(spec.samples(), spec.rate, spec.jitter, rng);
  for (double t : out.raw.timestamps) {
    const Vec3 g = path.at(t);
    Vec3 d{0.0, 0.0, 0.0};
    const auto it = std::upper_bound(spec.schedule.begin(), spec.schedule.end(), t,
                                     [](double x, const RegimeSegment& s) { return x < s.start; });
    const auto seg = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, (it - spec.schedule.begin()) - 1));
    if (spec.schedule[seg].state != 0) {
      d = scale(axes[seg], spec.burst_amplitude * std::sin(kTwoPi * 3.0 * (t - spec.schedule[seg].start)));
    }
    const Vec3 e{spec.noise * n(rng), spec.noise * n(rng), spec.noise * n(rng)};
    out.gravity.push_back(g);
    out.dynamic.push_back(d);
    out.raw.samples.push_back(add(add(g, d), e));
  }
  return out;
}

TwoClusterData gen_two_cluster(const SynthSpec& spec) {
  spec.validate();
  Rng rng = make_rng(spec.seed, "synth-two-cluster");
  std::normal_distribution<double> n(0.0, 1.0);
  const auto z = schedule_states(spec.schedule, spec.samples(), spec.rate);
  TwoClusterData out;
  out.series = ScalarSeries{spec.rate, {}, ScalarUnit::Raw};
  for (int s : z) {
    const bool adherent = s == 0;
    out.labels.push_back(adherent ? Adherence::Adherence : Adherence::Violation);
    out.series.values.push_back((adherent ? spec.separation * spec.noise : 0.0) + spec.noise * n(rng));
  }
  return out;
}

AdherenceLabels SynthRecording::labels_at(const std::vector<double>& times) const {
  AdherenceLabels out;
  out.reserve(times.size());
  for (double t : times) out.push_back(adherence.at(static_cast<std::size_t>(state_at(schedule, t))));
  return out;
}

std::vector<std::string> SynthRecording::behaviours_at(const std::vector<double>& times) const {
  std::vector<std::string> out;
  out.reserve(times.size());
  for (double t : times) out.push_back(behaviours.at(static_cast<std::size_t>(state_at(schedule, t))));
  return out;
}

namespace {

// Device-frame dynamic acceleration of one behaviour. `up` is the current
// gravity direction, `side` a unit vector orthogonal to it.
struct MotionSegment {
  int state = 0;
  double cadence = 1.8;             // Hz
  double phase = 0.0;
  std::vector<Vec3> axes;           // random motion directions
  std::vector<double> freqs, phases;
};

SynthRecording gen_accel_recording(const SynthSpec& spec, bool balance) {
  Rng rng = make_rng(spec.seed, balance ? "synth-balance" : "synth-walking");
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);

  SynthRecording rec;
  rec.kind = balance ? TestKind::Balance : TestKind::Walking;
  rec.schedule = spec.schedule;
  if (balance) {
    rec.behaviours = {"standing-still", "moving", "buzzer"};
    rec.adherence = {Adherence::Adherence, Adherence::Violation, Adherence::Violation};
  } else {
    rec.behaviours = {"walking", "standing", "handling"};
    rec.adherence = {Adherence::Adherence, Adherence::Violation, Adherence::Violation};
  }
  for (const auto& s : spec.schedule) {
    if (static_cast<std::size_t>(s.state) >= rec.behaviours.size()) {
      throw Error(ErrorCode::InvalidSchedule, "unknown behaviour state " + std::to_string(s.state));
    }
  }

  // Orientation keyframes at every behaviour change and every 15 s, with
  // larger turns inside phone-handling segments.
  std::vector<double> keys{0.0, spec.duration};
  for (const auto& s : spec.schedule) {
    keys.push_back(s.start);
    if (!balance && s.state == 2) keys.push_back(0.5 * (s.start + s.end));
  }
  for (double t = 15.0; t < spec.duration; t += 15.0) keys.push_back(t);
  const auto handling_at = [&](double t) { return !balance && state_at(spec.schedule, t) == 2; };
  const GravityPath path =
      random_gravity_path(keys, [&](double t) { return spec.drift * (handling_at(t) ? 0.5 : 0.05); }, rng);

  std::vector<MotionSegment> motion;
  for (const auto& s : spec.schedule) {
    MotionSegment m;
    m.state = s.state;
    m.cadence = 1.6 + 0.4 * u(rng);
    m.phase = kTwoPi * u(rng);
    for (int i = 0; i < 4; ++i) {
      m.axes.push_back(random_unit(rng));
      m.freqs.push_back(0.5 + 3.5 * u(rng));
      m.phases.push_back(kTwoPi * u(rng));
    }
    motion.push_back(std::move(m));
  }

  rec.accel.timestamps = sample_times(spec.samples(), spec.rate, spec.jitter, rng);
  std::size_t seg = 0;
  for (double t : rec.accel.timestamps) {
    while (seg + 1 < spec.schedule.size() && t >= spec.schedule[seg + 1].start) ++seg;
    const auto& m = motion[seg];
    const Vec3 g = path.at(t);
    const Vec3 up = normalized(g);
    const Vec3 side = orthogonal(up);
    const double tl = t - spec.schedule[seg].start;
    Vec3 d{0.0, 0.0, 0.0};
    const double step = kTwoPi * m.cadence * tl + m.phase;
    if (!balance) {
      switch (m.state) {
        case 0:
          d = add(scale(up, 2.5 * std::sin(step) + 0.8 * std::sin(2.0 * step + 0.7)),
                  scale(side, 0.7 * std::sin(0.5 * step)));
          break;
        case 1:
          d = scale(side, 0.05 * std::sin(kTwoPi * 0.25 * tl));
          break;
        default:
          for (std::size_t i = 0; i < m.axes.size(); ++i) {
            d = add(d, scale(m.axes[i], 0.8 * std::sin(kTwoPi * m.freqs[i] * tl + m.phases[i])));
          }
          break;
      }
    } else {
      d = scale(side, 0.08 * std::sin(kTwoPi * 0.4 * tl));
      if (m.state == 1) {
        d = add(d, add(scale(up, 1.5 * std::sin(step)), scale(side, 0.5 * std::sin(0.5 * step))));
      } else if (m.state == 2) {
        d = add(d, scale(up, 2.0 * std::sin(kTwoPi * 40.0 * tl)));
      }
    }
    const Vec3 e{spec.noise * n(rng), spec.noise * n(rng), spec.noise * n(rng)};
    rec.accel.samples.push_back(add(add(g, d), e));
  }
  return rec;
}

SynthRecording gen_voice_recording(const SynthSpec& spec) {
  Rng rng = make_rng(spec.seed, "synth-voice");
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  SynthRecording rec;
  rec.kind = TestKind::Voice;
  rec.schedule = spec.schedule;
  rec.behaviours = {"phonation", "silence", "breath"};
  rec.adherence = {Adherence::Adherence, Adherence::Violation, Adherence::Violation};
  for (const auto& s : spec.schedule) {
    if (static_cast<std::size_t>(s.state) >= rec.behaviours.size()) {
      throw Error(ErrorCode::InvalidSchedule, "unknown behaviour state " + std::to_string(s.state));
    }
  }
  std::vector<double> f0;
  for (std::size_t i = 0; i < spec.schedule.size(); ++i) f0.push_back(120.0 + 100.0 * u(rng));

  rec.audio = ScalarSeries{spec.rate, {}, ScalarUnit::Raw};
  const std::size_t total = spec.samples();
  rec.audio.values.reserve(total);
  std::size_t seg = 0;
  for (std::size_t i = 0; i < total; ++i) {
    const double t = static_cast<double>(i) / spec.rate;
    while (seg + 1 < spec.schedule.size() && t >= spec.schedule[seg + 1].start) ++seg;
    const double tl = t - spec.schedule[seg].start;
    double v = spec.noise * n(rng);
    switch (spec.schedule[seg].state) {
      case 0: {
        const double env = 0.3 * (1.0 + 0.1 * std::sin(kTwoPi * 0.5 * tl)) * std::min(1.0, tl / 0.05);
        const double ph = kTwoPi * f0[seg] * tl;
        v += env * (std::sin(ph) + 0.5 * std::sin(2.0 * ph) + 0.25 * std::sin(3.0 * ph));
        break;
      }
      case 2:
        v += 0.02 * n(rng);
        break;
      default:
        break;
    }
    rec.audio.values.push_back(v);
  }
  return rec;
}

}  // namespace

SynthRecording gen_recording(const SynthSpec& spec) {
  spec.validate();
  switch (spec.scenario) {
    case Scenario::WalkingLike: return gen_accel_recording(spec, false);
    case Scenario::BalanceLike: return gen_accel_recording(spec, true);
    case Scenario::VoiceLike: return gen_voice_recording(spec);
    default: break;
  }
  throw Error(ErrorCode::InvalidArgument,
              "scenario " + std::string(to_string(spec.scenario)) + " is not a test recording");
}

}  // namespace qcseg
