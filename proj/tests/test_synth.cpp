#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>

#include "qcseg/error.hpp"
#include "qcseg/evaluation.hpp"
#include "qcseg/gmm.hpp"
#include "qcseg/hdp_ar.hpp"
#include "qcseg/io.hpp"
#include "qcseg/signal.hpp"
#include "qcseg/synth.hpp"
#include "qcseg/trend_filter.hpp"

using namespace qcseg;

namespace {

const Scenario kAll[] = {Scenario::WalkingLike,  Scenario::BalanceLike,  Scenario::VoiceLike,
                         Scenario::SwitchingAr,  Scenario::GravityDrift, Scenario::TwoCluster};

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no exception");
  return ErrorCode::Io;
}

SynthSpec fixed_three_regimes() {
  SynthSpec spec;
  spec.scenario = Scenario::SwitchingAr;
  spec.duration = 60.0;
  spec.rate = 30.0;
  spec.schedule = {{0, 0.0, 20.0}, {1, 20.0, 40.0}, {2, 40.0, 60.0}};
  spec.seed = 5;
  return spec;
}

std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("qcseg-test-synth-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_SUITE("specs") {
  TEST_CASE("default schedules tile the duration for every scenario") {
    for (Scenario s : kAll) {
      for (std::uint64_t seed = 0; seed < 10; ++seed) {
        CAPTURE(to_string(s));
        const SynthSpec spec = make_spec(s, seed);
        CHECK_NOTHROW(spec.validate());
        CHECK(spec.schedule.front().start == 0.0);
        CHECK(spec.schedule.back().end == doctest::Approx(spec.duration));
        CHECK(scenario_from_string(to_string(s)) == s);
      }
    }
  }

  TEST_CASE("schedules are drawn from the seed") {
    const auto a = make_spec(Scenario::WalkingLike, 3).schedule;
    const auto b = make_spec(Scenario::WalkingLike, 3).schedule;
    const auto c = make_spec(Scenario::WalkingLike, 4).schedule;
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK((a[i].start == b[i].start && a[i].state == b[i].state));
    CHECK((a.size() != c.size() || a[1].start != c[1].start));
  }

  TEST_CASE("broken schedules are rejected") {
    SynthSpec spec = fixed_three_regimes();
    spec.schedule[1].start = 21.0;  // gap
    CHECK(code_of([&] { spec.validate(); }) == ErrorCode::InvalidSchedule);
    spec = fixed_three_regimes();
    spec.schedule.back().end = 50.0;
    CHECK(code_of([&] { spec.validate(); }) == ErrorCode::InvalidSchedule);
    spec = fixed_three_regimes();
    spec.schedule[1].end = spec.schedule[1].start;
    CHECK(code_of([&] { gen_switching_ar(spec, default_switching_states()); }) == ErrorCode::InvalidSchedule);
    spec = fixed_three_regimes();
    spec.schedule.clear();
    CHECK(code_of([&] { gen_two_cluster(spec); }) == ErrorCode::InvalidSchedule);
    spec = fixed_three_regimes();
    spec.rate = 0.0;
    CHECK(code_of([&] { spec.validate(); }) == ErrorCode::InvalidArgument);
    CHECK(code_of([] { scenario_from_string("jogging"); }) == ErrorCode::InvalidArgument);
  }

  TEST_CASE("state lookup") {
    const auto s = fixed_three_regimes().schedule;
    CHECK(state_at(s, -1.0) == 0);
    CHECK(state_at(s, 19.999) == 0);
    CHECK(state_at(s, 20.0) == 1);
    CHECK(state_at(s, 75.0) == 2);
  }
}

TEST_SUITE("gen_switching_ar") {
  TEST_CASE("three regimes over 60 s at 30 Hz") {
    const auto path = gen_switching_ar(fixed_three_regimes(), default_switching_states());
    REQUIRE(path.series.size() == 1800);
    CHECK(path.series.rate == 30.0);
    const auto& z = path.truth.indicators;
    CHECK(z[599] == 0);
    CHECK(z[600] == 1);
    CHECK(z[1199] == 1);
    CHECK(z[1200] == 2);
    CHECK(z[1799] == 2);
  }

  TEST_CASE("same seed, same series") {
    const auto a = gen_switching_ar(fixed_three_regimes(), default_switching_states());
    const auto b = gen_switching_ar(fixed_three_regimes(), default_switching_states());
    CHECK(a.series.values == b.series.values);
    SynthSpec other = fixed_three_regimes();
    other.seed = 6;
    CHECK(a.series.values != gen_switching_ar(other, default_switching_states()).series.values);
  }

  TEST_CASE("schedule states beyond the supplied regimes are rejected") {
    std::vector<ArState> two = default_switching_states();
    two.pop_back();
    CHECK(code_of([&] { gen_switching_ar(fixed_three_regimes(), two); }) == ErrorCode::InvalidSchedule);
  }

  TEST_CASE("the periodic regime peaks where its closed-form spectrum does") {
    SynthSpec spec;
    spec.duration = 600.0;
    spec.rate = 30.0;
    spec.schedule = {{0, 0.0, 600.0}};
    spec.seed = 2;
    const ArState periodic = periodic_ar_state(2.0, 30.0, 1.0, 0.01);
    const auto path = gen_switching_ar(spec, {periodic});
    WelchOptions w;
    w.segment_length = 30 * 8;
    const auto est = power_spectrum(path.series, w);
    std::vector<double> f;
    for (double hz : est.frequencies) f.push_back(hz / 30.0);
    const auto exact = ar_psd(periodic, f);
    const auto pe = std::max_element(est.power.begin(), est.power.end()) - est.power.begin();
    const auto px = std::max_element(exact.power.begin(), exact.power.end()) - exact.power.begin();
    CHECK(std::abs(pe - px) <= 1);
    CHECK(est.frequencies[static_cast<std::size_t>(px)] == doctest::Approx(2.0).epsilon(0.07));
  }

  TEST_CASE("poles become coefficients") {
    const auto a = ar_from_poles({0.5, -0.25});
    REQUIRE(a.size() == 2);
    CHECK(a[0] == doctest::Approx(0.25));
    CHECK(a[1] == doctest::Approx(0.125));
  }
}

TEST_SUITE("gen_gravity_drift") {
  TEST_CASE("without bursts or noise the trend filter recovers gravity") {
    SynthSpec spec = make_spec(Scenario::GravityDrift, 4);
    spec.burst_amplitude = 0.0;
    spec.noise = 0.0;
    const auto d = gen_gravity_drift(spec);
    const auto uniform = interpolate_uniform(d.raw, spec.rate);
    const auto dec = remove_gravity(uniform, {});
    double worst = 0.0;
    for (std::size_t i = 0; i < uniform.size(); ++i) {
      for (std::size_t a = 0; a < 3; ++a) worst = std::max(worst, std::abs(dec.trend.samples[i][a] - d.gravity[i][a]));
    }
    MESSAGE("max trend error " << worst);
    CHECK(worst < 1e-3);
  }

  TEST_CASE("gravity has the right magnitude and bursts follow the schedule") {
    const SynthSpec spec = make_spec(Scenario::GravityDrift, 1);
    const auto d = gen_gravity_drift(spec);
    REQUIRE(d.raw.timestamps.size() == spec.samples());
    for (std::size_t i = 0; i < d.gravity.size(); ++i) {
      const double g = std::sqrt(d.gravity[i][0] * d.gravity[i][0] + d.gravity[i][1] * d.gravity[i][1] +
                                 d.gravity[i][2] * d.gravity[i][2]);
      CHECK(g == doctest::Approx(9.81).epsilon(0.05));
      const bool burst = state_at(spec.schedule, d.raw.timestamps[i]) != 0;
      const double dyn = std::abs(d.dynamic[i][0]) + std::abs(d.dynamic[i][1]) + std::abs(d.dynamic[i][2]);
      if (!burst) CHECK(dyn == 0.0);
    }
  }

  TEST_CASE("zero drift keeps gravity constant") {
    SynthSpec spec = make_spec(Scenario::GravityDrift, 2);
    spec.drift = 0.0;
    const auto d = gen_gravity_drift(spec);
    for (const auto& g : d.gravity) {
      for (std::size_t a = 0; a < 3; ++a) CHECK(g[a] == d.gravity.front()[a]);
    }
  }

  TEST_CASE("jittered timestamps are irregular but increasing") {
    SynthSpec spec = make_spec(Scenario::GravityDrift, 3);
    spec.jitter = true;
    const auto d = gen_gravity_drift(spec);
    double lo = 1e9, hi = 0.0;
    for (std::size_t i = 1; i < d.raw.timestamps.size(); ++i) {
      const double step = d.raw.timestamps[i] - d.raw.timestamps[i - 1];
      CHECK(step > 0.0);
      lo = std::min(lo, step);
      hi = std::max(hi, step);
    }
    CHECK(hi - lo > 0.1 / spec.rate);
    CHECK_NOTHROW(interpolate_uniform(d.raw, spec.rate));
  }
}

TEST_SUITE("gen_two_cluster") {
  TEST_CASE("class means follow the separation") {
    const SynthSpec spec = make_spec(Scenario::TwoCluster, 1);
    const auto d = gen_two_cluster(spec);
    double sa = 0, sv = 0, na = 0, nv = 0;
    for (std::size_t i = 0; i < d.labels.size(); ++i) {
      if (d.labels[i] == Adherence::Adherence) sa += d.series.values[i], ++na;
      else sv += d.series.values[i], ++nv;
    }
    CHECK(sa / na == doctest::Approx(6.0).epsilon(0.05));
    CHECK(std::abs(sv / nv) < 0.1);
  }

  TEST_CASE("indistinguishable classes score near chance") {
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      SynthSpec spec = make_spec(Scenario::TwoCluster, seed);
      spec.separation = 0.0;
      const auto d = gen_two_cluster(spec);
      const auto seg = segment_gmm(d.series, TestKind::Walking, default_median_window(d.series.rate));
      const auto m = tp_tn_ba(seg.labels, d.labels, MetricDefinition::Recall);
      CAPTURE(seed);
      CHECK(std::abs(m.require_ba() - 0.5) <= 0.1);
    }
  }
}

TEST_SUITE("gen_recording") {
  TEST_CASE("voice-like energy is high during phonation and low in silence") {
    const SynthSpec spec = make_spec(Scenario::VoiceLike, 1);
    const auto rec = gen_recording(spec);
    CHECK(rec.kind == TestKind::Voice);
    REQUIRE(rec.audio.size() == spec.samples());
    const auto e = windowed_energy(rec.audio, 441);
    double phon = 0, sil = 0, np = 0, ns = 0;
    for (std::size_t i = 0; i < e.size(); ++i) {
      const int s = state_at(rec.schedule, (static_cast<double>(i) + 0.5) * 0.01);
      if (s == 0) phon += e.values[i], ++np;
      if (s == 1) sil += e.values[i], ++ns;
    }
    REQUIRE(np > 0);
    REQUIRE(ns > 0);
    CHECK(phon / np > 10.0 * sil / ns);
  }

  TEST_CASE("accelerometer scenarios produce increasing timestamps and labels for every state") {
    for (Scenario s : {Scenario::WalkingLike, Scenario::BalanceLike}) {
      const SynthSpec spec = make_spec(s, 2);
      const auto rec = gen_recording(spec);
      REQUIRE(rec.accel.timestamps.size() == spec.samples());
      CHECK(std::is_sorted(rec.accel.timestamps.begin(), rec.accel.timestamps.end()));
      for (const auto& seg : rec.schedule) {
        CHECK(static_cast<std::size_t>(seg.state) < rec.behaviours.size());
      }
      const auto labels = rec.labels_at(rec.accel.timestamps);
      CHECK(std::count(labels.begin(), labels.end(), Adherence::Adherence) > 0);
      CHECK(std::count(labels.begin(), labels.end(), Adherence::Violation) > 0);
    }
  }

  TEST_CASE("non-recording scenarios are rejected") {
    CHECK(code_of([] { gen_recording(make_spec(Scenario::TwoCluster, 1)); }) == ErrorCode::InvalidArgument);
  }
}

TEST_CASE("every generator is bit-identical on rerun") {
  for (Scenario s : {Scenario::WalkingLike, Scenario::BalanceLike, Scenario::VoiceLike}) {
    const auto a = gen_recording(make_spec(s, 9));
    const auto b = gen_recording(make_spec(s, 9));
    CHECK(a.accel.timestamps == b.accel.timestamps);
    CHECK(a.accel.samples == b.accel.samples);
    CHECK(a.audio.values == b.audio.values);
  }
  const auto g1 = gen_gravity_drift(make_spec(Scenario::GravityDrift, 9));
  const auto g2 = gen_gravity_drift(make_spec(Scenario::GravityDrift, 9));
  CHECK(g1.raw.samples == g2.raw.samples);
  const auto c1 = gen_two_cluster(make_spec(Scenario::TwoCluster, 9));
  const auto c2 = gen_two_cluster(make_spec(Scenario::TwoCluster, 9));
  CHECK(c1.series.values == c2.series.values);
  CHECK(c1.labels == c2.labels);
}

TEST_CASE("truth schedules round-trip through CSV") {
  const auto dir = scratch_dir("schedule");
  for (Scenario s : {Scenario::WalkingLike, Scenario::BalanceLike, Scenario::VoiceLike}) {
    const auto rec = gen_recording(make_spec(s, 5));
    const TruthSchedule truth{rec.schedule, rec.behaviours, rec.adherence};
    const auto path = dir / "truth.csv";
    write_schedule(path, truth, {});
    const TruthSchedule back = read_schedule(path);
    REQUIRE(back.schedule.size() == truth.schedule.size());
    for (std::size_t i = 0; i < truth.schedule.size(); ++i) {
      CHECK(back.schedule[i].start == truth.schedule[i].start);
      CHECK(back.schedule[i].end == truth.schedule[i].end);
      CHECK(back.schedule[i].state == truth.schedule[i].state);
    }
    for (const auto& seg : truth.schedule) {
      const auto k = static_cast<std::size_t>(seg.state);
      CHECK(back.behaviours.at(k) == truth.behaviours[k]);
      CHECK(back.adherence.at(k) == truth.adherence[k]);
    }
  }
  std::filesystem::remove_all(dir);
}
