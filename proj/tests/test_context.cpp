#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "qcseg/context.hpp"
#include "qcseg/error.hpp"
#include "qcseg/evaluation.hpp"

using namespace qcseg;

namespace {

constexpr auto A = Adherence::Adherence;
constexpr auto V = Adherence::Violation;

StateSequence seq(std::vector<int> z) {
  StateSequence s;
  s.indicators = std::move(z);
  return s;
}

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no exception");
  return ErrorCode::Io;
}

}  // namespace

TEST_SUITE("mode_behaviour_map") {
  TEST_CASE("majority label wins") {
    std::vector<int> z(10, 3);
    std::vector<std::string> b(8, "walking");
    b.resize(10, "standing");
    const auto m = mode_behaviour_map(seq(z), b);
    CHECK(m.at(3) == "walking");
  }

  TEST_CASE("ties go to the lexicographically smallest label") {
    const auto m = mode_behaviour_map(seq({0, 0, 0, 0}), {"b", "a", "b", "a"});
    CHECK(m.at(0) == "a");
  }

  TEST_CASE("a state without labels is an error") {
    CHECK(code_of([] { mode_behaviour_map(seq({0, 1}), {"a", ""}); }) == ErrorCode::UnlabelledState);
    CHECK(code_of([] { mode_behaviour_map(seq({0, 1}), {"a"}); }) == ErrorCode::InvalidArgument);
  }

  TEST_CASE("invariant under a permutation of time") {
    std::mt19937_64 rng(4);
    std::uniform_int_distribution<int> state(0, 4), label(0, 2);
    const std::vector<std::string> names{"x", "y", "z"};
    for (int rep = 0; rep < 20; ++rep) {
      std::vector<int> z(200);
      std::vector<std::string> b(200);
      for (std::size_t t = 0; t < z.size(); ++t) {
        z[t] = state(rng);
        b[t] = names[static_cast<std::size_t>(label(rng))];
      }
      std::vector<std::size_t> perm(z.size());
      std::iota(perm.begin(), perm.end(), 0);
      std::shuffle(perm.begin(), perm.end(), rng);
      std::vector<int> zp(z.size());
      std::vector<std::string> bp(z.size());
      for (std::size_t t = 0; t < z.size(); ++t) {
        zp[t] = z[perm[t]];
        bp[t] = b[perm[t]];
      }
      CHECK(mode_behaviour_map(seq(z), b) == mode_behaviour_map(seq(zp), bp));
    }
  }

  TEST_CASE("controlled test with four behaviours and a near-diagonal confusion") {
    const std::vector<std::string> names{"sitting", "standing", "turning", "walking"};
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<int> other(1, 3);
    std::vector<int> z;
    std::vector<std::string> truth;
    // Blocks of each behaviour; the segmenter (states 7, 2, 11, 5) errs on 4%
    // of points by picking another behaviour's state.
    const std::vector<int> state_of{7, 2, 11, 5};
    for (int block = 0; block < 40; ++block) {
      const int b = block % 4;
      for (int i = 0; i < 50; ++i) {
        const int s = u(rng) < 0.04 ? (b + other(rng)) % 4 : b;
        z.push_back(state_of[static_cast<std::size_t>(s)]);
        truth.push_back(names[static_cast<std::size_t>(b)]);
      }
    }
    const auto map = mode_behaviour_map(seq(z), truth);
    REQUIRE(map.size() == 4);
    for (std::size_t b = 0; b < 4; ++b) CHECK(map.at(state_of[b]) == names[b]);
    const auto predicted = apply_behaviour_map(seq(z), map);
    const auto per = per_behaviour_metrics(predicted, truth);
    REQUIRE(per.size() == 4);
    for (const auto& [name, m] : per) {
      CAPTURE(name);
      CHECK(m.require_ba() >= 0.9);
    }
  }
}

TEST_SUITE("rescale_to_counts") {
  TEST_CASE("examples") {
    CHECK(rescale_to_counts({1.0, 0.0, 0.0}, 100) == CountVector{100, 0, 0});
    CHECK(rescale_to_counts({0.5, 0.5}, 100) == CountVector{50, 50});
    CHECK(rescale_to_counts({0.004, 0.996}, 100) == CountVector{0, 100});
  }

  TEST_CASE("everything rounding to zero goes to the argmax") {
    CHECK(rescale_to_counts({0.3, 0.4, 0.3}, 1) == CountVector{0, 1, 0});
    std::vector<double> flat(300, 1.0 / 300.0);
    flat[17] += 1e-6;
    const auto c = rescale_to_counts(flat, 100);
    CHECK(std::accumulate(c.begin(), c.end(), 0) == 100);
    CHECK(c[17] == 100);
  }

  TEST_CASE("invalid scale") {
    CHECK(code_of([] { rescale_to_counts({1.0}, 0); }) == ErrorCode::InvalidArgument);
  }

  TEST_CASE("counts from states") {
    StateSequence s = seq({1, 0, 2});
    CHECK(counts_from_states(s, 3, 10) == std::vector<CountVector>{{0, 10, 0}, {10, 0, 0}, {0, 0, 10}});
    s.posteriors = {{0.2, 0.8, 0.0}, {1.0, 0.0, 0.0}, {0.0, 0.4, 0.6}};
    CHECK(counts_from_states(s, 3, 10) == std::vector<CountVector>{{2, 8, 0}, {10, 0, 0}, {0, 4, 6}});
    CHECK(counts_from_states(s, 3, 10, false)[0] == CountVector{0, 10, 0});
  }
}

TEST_SUITE("nb_train") {
  TEST_CASE("a single attribute is degenerate at one") {
    const std::vector<CountVector> in{{9}, {1}};
    const auto m = nb_train(in, {A, V}, 0.0);
    CHECK(m.probabilities[0] == std::vector<double>{1.0});
    CHECK(m.probabilities[1] == std::vector<double>{1.0});
  }

  TEST_CASE("two attributes with add-one smoothing") {
    const std::vector<CountVector> in{{8, 2}, {1, 9}};
    const auto m = nb_train(in, {A, V}, 1.0);
    CHECK(m.probabilities[0][0] == doctest::Approx(9.0 / 12.0));
    CHECK(m.probabilities[0][1] == doctest::Approx(3.0 / 12.0));
    CHECK(m.probabilities[1][0] == doctest::Approx(2.0 / 12.0));
    CHECK(m.probabilities[1][1] == doctest::Approx(10.0 / 12.0));
    CHECK(m.priors[0] == doctest::Approx(0.5));
  }

  TEST_CASE("priors are empirical unless overridden") {
    const std::vector<CountVector> in{{1, 0}, {1, 0}, {1, 0}, {0, 1}};
    const auto m = nb_train(in, {A, A, A, V});
    CHECK(m.priors[0] == doctest::Approx(0.75));
    const auto o = nb_train(in, {A, A, A, V}, 1.0, std::array<double, 2>{1.0, 1.0});
    CHECK(o.priors[0] == doctest::Approx(0.5));
    CHECK(o.priors[1] == doctest::Approx(0.5));
  }

  TEST_CASE("a single class cannot be trained") {
    const std::vector<CountVector> in{{1}, {2}};
    CHECK(code_of([&] { nb_train(in, {A, A}); }) == ErrorCode::SingleClassTraining);
  }

  TEST_CASE("rows stay on the simplex for sparse inputs") {
    std::mt19937_64 rng(2);
    std::uniform_int_distribution<int> width(1, 12), count(0, 50);
    std::bernoulli_distribution sparse(0.8), cls(0.5);
    for (int rep = 0; rep < 50; ++rep) {
      const int w = width(rng);
      std::vector<CountVector> in(30, CountVector(static_cast<std::size_t>(w), 0));
      AdherenceLabels labels(30);
      for (std::size_t t = 0; t < in.size(); ++t) {
        for (auto& c : in[t]) c = sparse(rng) ? 0 : count(rng);
        labels[t] = t < 2 ? (t == 0 ? A : V) : (cls(rng) ? A : V);
      }
      for (double smoothing : {1e-6, 0.5, 1.0, 10.0}) {
        const auto m = nb_train(in, labels, smoothing);
        for (int c = 0; c < 2; ++c) {
          const double s = std::accumulate(m.probabilities[c].begin(), m.probabilities[c].end(), 0.0);
          if (!m.attribute_states.empty()) CHECK(std::abs(s - 1.0) < 1e-9);
          for (double p : m.probabilities[c]) CHECK(p > 0.0);
        }
        CHECK(std::abs(m.priors[0] + m.priors[1] - 1.0) < 1e-12);
      }
    }
  }
}

TEST_SUITE("nb_predict") {
  TEST_CASE("mass on an adherence-only state predicts adherence") {
    const std::vector<CountVector> in{{100, 0, 0}, {0, 100, 0}, {0, 0, 100}};
    const auto m = nb_train(in, {A, V, V}, 1.0, std::array<double, 2>{1.0, 1.0});
    CHECK(nb_predict(m, {100, 0, 0}).label == A);
    CHECK(nb_predict(m, {0, 100, 0}).label == V);
  }

  TEST_CASE("a never-seen state predicts violation") {
    const std::vector<CountVector> in{{100, 0, 0, 0}, {0, 100, 0, 0}};
    const auto m = nb_train(in, {A, V}, 1.0, std::array<double, 2>{0.99, 0.01});
    REQUIRE(!m.attribute_of(3));
    const auto p = nb_predict(m, {0, 0, 0, 100});
    CHECK(p.label == V);
    CHECK(p.probabilities[1] == 1.0);
    // Even a little unseen mass overrides strong adherence evidence.
    CHECK(nb_predict(m, {99, 0, 0, 1}).label == V);
    // States beyond the training width are unseen too.
    CHECK(nb_predict(m, {0, 0, 0, 0, 0, 3}).label == V);
  }

  TEST_CASE("identical class rows fall back to the prior") {
    const std::vector<CountVector> in{{5, 5}, {5, 5}, {5, 5}};
    const auto m = nb_train(in, {A, V, V});
    CHECK(m.probabilities[0] == m.probabilities[1]);
    CHECK(nb_predict(m, {40, 3}).label == V);
    const auto flipped = nb_train(in, {A, A, V});
    CHECK(nb_predict(flipped, {3, 40}).label == A);
  }

  TEST_CASE("probabilities are normalized scores") {
    const std::vector<CountVector> in{{8, 2}, {1, 9}};
    const auto m = nb_train(in, {A, V});
    const auto p = nb_predict(m, {3, 1});
    const double l0 = std::log(0.5) + 3 * std::log(9.0 / 12.0) + std::log(3.0 / 12.0);
    const double l1 = std::log(0.5) + 3 * std::log(2.0 / 12.0) + std::log(10.0 / 12.0);
    CHECK(p.log_scores[0] == doctest::Approx(l0));
    CHECK(p.log_scores[1] == doctest::Approx(l1));
    CHECK(p.probabilities[0] == doctest::Approx(1.0 / (1.0 + std::exp(l1 - l0))));
    CHECK(p.confidence() == doctest::Approx(p.probabilities[0]));
  }

  TEST_CASE("argmax is invariant to integer scaling of the input under equal priors") {
    std::mt19937_64 rng(6);
    std::uniform_int_distribution<int> count(0, 30), mult(2, 9);
    std::bernoulli_distribution cls(0.5);
    for (int rep = 0; rep < 30; ++rep) {
      std::vector<CountVector> in(40, CountVector(5));
      AdherenceLabels labels(40);
      for (std::size_t t = 0; t < in.size(); ++t) {
        for (auto& c : in[t]) c = count(rng);
        labels[t] = t == 0 ? A : t == 1 ? V : (cls(rng) ? A : V);
      }
      const auto m = nb_train(in, labels, 1.0, std::array<double, 2>{0.5, 0.5});
      for (int probe = 0; probe < 10; ++probe) {
        CountVector x(5);
        for (auto& c : x) c = count(rng);
        const auto base = nb_predict(m, x);
        if (base.log_scores[0] == base.log_scores[1]) continue;
        const int k = mult(rng);
        CountVector y = x;
        for (auto& c : y) c *= k;
        CHECK(nb_predict(m, y).label == base.label);
      }
    }
  }

  TEST_CASE("disjoint state supports classify their own training data perfectly") {
    std::mt19937_64 rng(8);
    std::uniform_int_distribution<int> which(0, 2);
    std::vector<CountVector> in;
    AdherenceLabels labels;
    for (int t = 0; t < 300; ++t) {
      const bool adh = t % 3 != 0;
      CountVector p(6, 0);
      p[static_cast<std::size_t>((adh ? 0 : 3) + which(rng))] = 100;
      in.push_back(p);
      labels.push_back(adh ? A : V);
    }
    const auto m = nb_train(in, labels);
    for (std::size_t t = 0; t < in.size(); ++t) CHECK(nb_predict(m, in[t]).label == labels[t]);
  }
}

TEST_SUITE("lda_projection") {
  TEST_CASE("separates the classes along the first axis") {
    std::vector<CountVector> in;
    AdherenceLabels labels;
    for (int t = 0; t < 100; ++t) {
      const bool adh = t % 2 == 0;
      in.push_back(adh ? CountVector{80 + t % 7, 20 - t % 7, 0} : CountVector{10 + t % 5, 30, 60 - t % 5});
      labels.push_back(adh ? A : V);
    }
    const auto m = nb_train(in, labels);
    const auto pts = lda_projection(in, labels, m);
    double lo_a = 1e300, hi_a = -1e300, lo_v = 1e300, hi_v = -1e300;
    std::size_t labelled = 0;
    for (const auto& p : pts) {
      if (!p.label) continue;
      ++labelled;
      CHECK(std::isfinite(p.x));
      CHECK(std::isfinite(p.y));
      if (*p.label == A) lo_a = std::min(lo_a, p.x), hi_a = std::max(hi_a, p.x);
      else lo_v = std::min(lo_v, p.x), hi_v = std::max(hi_v, p.x);
    }
    CHECK(labelled == in.size());
    CHECK((hi_a < lo_v || hi_v < lo_a));
  }
}
