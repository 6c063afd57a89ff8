#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "oracles.hpp"
#include "qcseg/error.hpp"
#include "qcseg/trend_filter.hpp"

using namespace qcseg;

namespace {

ScalarSeries series(std::vector<double> v, double rate = 1.0) { return {rate, std::move(v), ScalarUnit::Raw}; }

TrendFilterResult solve(const std::vector<double>& x, double lambda, FidelityMode mode = FidelityMode::Squared) {
  TrendFilterConfig cfg;
  cfg.lambda = lambda;
  cfg.fidelity = mode;
  return l1_trend_filter(series(x), cfg);
}

std::vector<double> kinked(std::size_t n, double noise, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> e(0.0, noise);
  std::vector<double> x(n);
  const double kink = 0.4 * static_cast<double>(n);
  for (std::size_t t = 0; t < n; ++t) {
    const double tt = static_cast<double>(t);
    x[t] = 1.0 + 0.01 * tt - (tt > kink ? 0.03 * (tt - kink) : 0.0) + e(rng);
  }
  return x;
}

// Shared by the absolute-mode check; the frozen objective values below were
// computed for exactly this construction by an LP solver (HiGHS) on the
// equivalent linear program in u >= |x - g|, v >= |Dg|.
std::vector<double> lp_fixture(std::size_t n) {
  std::vector<double> x(n);
  const double half = static_cast<double>(n) / 2.0;
  for (std::size_t t = 0; t < n; ++t) {
    const double tt = static_cast<double>(t);
    x[t] = 0.05 * tt + (tt > half ? 0.1 * (tt - half) : 0.0) + 0.3 * std::sin(1.7 * tt);
  }
  return x;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_CASE("a straight line is its own trend for any lambda") {
  std::vector<double> x(200);
  for (std::size_t t = 0; t < x.size(); ++t) x[t] = 2.0 * static_cast<double>(t) + 1.0;
  for (double lambda : {0.0, 0.1, 10.0, 1e4}) {
    CHECK(max_abs_diff(solve(x, lambda).trend.values, x) < 1e-9);
  }
}

TEST_CASE("lambda zero returns the input") {
  const auto x = kinked(100, 0.3, 2);
  CHECK(max_abs_diff(solve(x, 0.0).trend.values, x) < 1e-9);
  CHECK(max_abs_diff(solve(x, 0.0, FidelityMode::Absolute).trend.values, x) < 1e-9);
}

TEST_CASE("matches the active-set QP oracle at T = 50") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto x = kinked(50, 0.1, seed);
    for (double lambda : {0.01, 0.3, 3.0}) {
      const auto r = solve(x, lambda);
      CHECK(r.converged);
      const double ref = oracle::l1tf_objective(x, oracle::l1tf(x, lambda), lambda);
      CHECK(std::abs(trend_objective(x, r.trend.values, lambda, FidelityMode::Squared) - ref) < 1e-6);
    }
  }
}

TEST_CASE("absolute fidelity matches frozen linear-program optima") {
  struct Case {
    std::size_t n;
    double lambda;
    double objective;
  };
  for (const Case c : {Case{30, 0.05, 0.6020821775933412}, Case{30, 0.5, 2.663527312921211},
                       Case{30, 2.0, 2.8736244341425206}, Case{50, 0.2, 4.021105826656887}}) {
    const auto x = lp_fixture(c.n);
    const auto r = solve(x, c.lambda, FidelityMode::Absolute);
    const double obj = trend_objective(x, r.trend.values, c.lambda, FidelityMode::Absolute);
    CAPTURE(c.n);
    CAPTURE(c.lambda);
    CHECK(obj == doctest::Approx(c.objective).epsilon(1e-6));
  }
}

TEST_CASE("recovers a single kink under noise") {
  const std::size_t n = 500;
  const auto x = kinked(n, 0.05, 42);
  const auto clean = kinked(n, 0.0, 42);
  const auto r = solve(x, 20.0);
  CHECK(r.converged);
  CHECK(max_abs_diff(r.trend.values, clean) < 0.1);
}

TEST_CASE("objective trace never increases") {
  for (auto mode : {FidelityMode::Squared, FidelityMode::Absolute}) {
    const auto r = solve(kinked(400, 0.2, 9), 5.0, mode);
    REQUIRE(!r.objective_trace.empty());
    for (std::size_t i = 1; i < r.objective_trace.size(); ++i) {
      CHECK(r.objective_trace[i] <= r.objective_trace[i - 1]);
    }
  }
}

TEST_CASE("very large lambda gives an affine trend") {
  const auto x = kinked(300, 0.5, 4);
  const auto g = solve(x, 1e6 * 1.0).trend.values;
  double worst = 0.0;
  for (std::size_t t = 1; t + 1 < g.size(); ++t) worst = std::max(worst, std::abs(g[t - 1] - 2 * g[t] + g[t + 1]));
  CHECK(worst < 1e-3);
}

TEST_CASE("adding an affine function shifts the trend by the same function") {
  const auto x = kinked(250, 0.2, 8);
  std::vector<double> y(x);
  for (std::size_t t = 0; t < y.size(); ++t) y[t] += -0.7 * static_cast<double>(t) + 3.0;
  const auto gx = solve(x, 4.0).trend.values;
  const auto gy = solve(y, 4.0).trend.values;
  for (std::size_t t = 0; t < x.size(); ++t) {
    CHECK(std::abs((gy[t] - gx[t]) - (-0.7 * static_cast<double>(t) + 3.0)) < 1e-6);
  }
}

TEST_CASE("default lambda and config validation") {
  std::vector<double> x{1, 2, 4, 3, 5, 7, 6, 8, 9, 10};
  double mean = 0.0, var = 0.0;
  for (double v : x) mean += v / 10.0;
  for (double v : x) var += (v - mean) * (v - mean) / 10.0;
  CHECK(default_lambda(x) == doctest::Approx(50.0 * 10.0 / 1000.0 * std::sqrt(var)));

  TrendFilterConfig bad;
  bad.lambda = -1.0;
  CHECK_THROWS_AS(bad.validate(), Error);
  TrendFilterConfig iters;
  iters.max_iterations = 0;
  CHECK_THROWS_AS(iters.validate(), Error);
}

TEST_CASE("fewer than three samples") {
  try {
    solve({1.0, 2.0}, 1.0);
    FAIL("expected TooShort");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::TooShort);
  }
}

TEST_SUITE("remove_gravity") {
  TEST_CASE("a stationary device has no dynamic component") {
    TriaxialSeries in{120.0, std::vector<Vec3>(600, Vec3{0.0, 0.0, 9.81})};
    const auto d = remove_gravity(in, {});
    for (std::size_t i = 0; i < in.size(); ++i) {
      for (std::size_t a = 0; a < 3; ++a) {
        CHECK(std::abs(d.trend.samples[i][a] - in.samples[i][a]) < 1e-6);
        CHECK(std::abs(d.dynamic.samples[i][a]) < 1e-6);
      }
    }
  }

  TEST_CASE("slow drift plus a 4 Hz oscillation separate") {
    const double rate = 120.0;
    const std::size_t n = 120 * 30;
    TriaxialSeries in{rate, {}};
    std::vector<double> drift(n), wave(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double t = static_cast<double>(i) / rate;
      drift[i] = 2.0 + 0.1 * t;
      wave[i] = 0.5 * std::sin(2 * std::numbers::pi * 4.0 * t);
      in.samples.push_back({drift[i] + wave[i], 9.0 - 0.05 * t, wave[i]});
    }
    const auto d = remove_gravity(in, {});
    double dyn = 0.0, ref = 0.0, terr = 0.0, tref = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      dyn += d.dynamic.samples[i][0] * d.dynamic.samples[i][0];
      ref += wave[i] * wave[i];
      terr += (d.trend.samples[i][0] - drift[i]) * (d.trend.samples[i][0] - drift[i]);
      tref += drift[i] * drift[i];
    }
    CHECK(std::sqrt(dyn / ref) >= 0.9);
    CHECK(std::sqrt(terr / tref) <= 0.05);
  }

  TEST_CASE("trend plus dynamic reconstructs the input") {
    std::mt19937_64 rng(12);
    std::normal_distribution<double> e(0.0, 1.0);
    TriaxialSeries in{50.0, {}};
    for (int i = 0; i < 500; ++i) in.samples.push_back({e(rng), 9.81 + e(rng), 0.1 * i + e(rng)});
    const auto d = remove_gravity(in, {});
    CHECK(d.trend.rate == in.rate);
    CHECK(d.dynamic.size() == in.size());
    for (std::size_t i = 0; i < in.size(); ++i) {
      for (std::size_t a = 0; a < 3; ++a) {
        CHECK(std::abs(d.trend.samples[i][a] + d.dynamic.samples[i][a] - in.samples[i][a]) <= 1e-12);
      }
    }
  }

  TEST_CASE("two samples are too short") {
    TriaxialSeries in{50.0, {{0, 0, 1}, {0, 0, 1}}};
    CHECK_THROWS_AS(remove_gravity(in, {}), Error);
  }
}
