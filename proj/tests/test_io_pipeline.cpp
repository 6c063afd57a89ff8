#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "qcseg/error.hpp"
#include "qcseg/io.hpp"
#include "qcseg/pipeline.hpp"
#include "qcseg/synth.hpp"

using namespace qcseg;
namespace fs = std::filesystem;

namespace {

struct ScratchDir {
  fs::path path;
  explicit ScratchDir(const std::string& name) : path(fs::temp_directory_path() / ("qcseg-test-io-" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~ScratchDir() { fs::remove_all(path); }
  fs::path operator/(const std::string& f) const { return path / f; }
};

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream(p) << s;
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Error error_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e;
  }
  FAIL("no exception");
  return Error(ErrorCode::Io, "");
}

}  // namespace

TEST_SUITE("csv") {
  TEST_CASE("numeric columns round-trip bit-identically") {
    ScratchDir dir("csv");
    std::mt19937_64 rng(1);
    std::normal_distribution<double> n;
    std::vector<double> a, b;
    for (int i = 0; i < 500; ++i) {
      a.push_back(n(rng) * std::pow(10.0, i % 40 - 20));
      b.push_back(static_cast<double>(i) / 7.0);
    }
    a[0] = 0.0;
    a[1] = -0.0;
    a[2] = std::numeric_limits<double>::denorm_min();
    a[3] = std::numeric_limits<double>::max();
    write_csv(dir / "x.csv", {"a", "b"}, {a, b}, {"abcdef0123456789", 42});
    const CsvTable t = read_csv(dir / "x.csv");
    CHECK(t.columns == std::vector<std::string>{"a", "b"});
    const auto ra = t.numeric("a"), rb = t.numeric("b");
    REQUIRE(ra.size() == a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(ra[i] == a[i]);
      CHECK(rb[i] == b[i]);
    }
    CHECK(read_text(dir / "x.csv").rfind("# qcseg config=abcdef0123456789 seed=42\n", 0) == 0);
  }

  TEST_CASE("comments and blank lines are skipped, whitespace trimmed") {
    ScratchDir dir("csv-comments");
    write_text(dir / "x.csv", "# note\nt, v\n\n0, 1.5\n# mid\n 1 ,2\n");
    const CsvTable t = read_csv(dir / "x.csv");
    CHECK(t.numeric("v") == std::vector<double>{1.5, 2.0});
    CHECK(t.has("t"));
    CHECK(!t.has("x"));
  }

  TEST_CASE("malformed files name the problem") {
    ScratchDir dir("csv-bad");
    write_text(dir / "fields.csv", "t,v\n0,1\n1,2,3\n");
    const Error e = error_of([&] { read_csv(dir / "fields.csv"); });
    CHECK(e.code() == ErrorCode::Format);
    CHECK(std::string(e.what()).find(":3:") != std::string::npos);

    write_text(dir / "text.csv", "t,v\n0,abc\n");
    CHECK(error_of([&] { read_csv(dir / "text.csv").numeric("v"); }).code() == ErrorCode::Format);
    CHECK(error_of([&] { read_csv(dir / "text.csv").numeric("w"); }).code() == ErrorCode::Format);
    write_text(dir / "empty.csv", "# nothing\n");
    CHECK(error_of([&] { read_csv(dir / "empty.csv"); }).code() == ErrorCode::Format);
    CHECK(error_of([&] { read_csv(dir / "missing.csv"); }).code() == ErrorCode::Io);
  }

  TEST_CASE("typed files round-trip") {
    ScratchDir dir("typed");
    TimestampedTriaxial acc{{0.0, 0.01, 0.025}, {{1, 2, 3}, {4, 5, 6}, {-1, 0.5, 9.81}}};
    write_triaxial(dir / "acc.csv", acc, {});
    const auto acc2 = read_triaxial(dir / "acc.csv");
    CHECK(acc2.timestamps == acc.timestamps);
    CHECK(acc2.samples == acc.samples);

    const std::vector<double> t{0.0, 0.5, 1.0, 1.5};
    write_labels(dir / "u.csv", t, {Adherence::Adherence, Adherence::Violation, Adherence::Violation, Adherence::Adherence},
                 {0.9, 0.6, 0.7, 1.0}, {});
    const auto u = read_labels(dir / "u.csv");
    CHECK(u.labels[1] == Adherence::Violation);
    CHECK(u.confidence == std::vector<double>{0.9, 0.6, 0.7, 1.0});

    StateSequence z;
    z.indicators = {0, 2, 2, 1};
    z.posteriors = {{1, 0, 0}, {0, 0.25, 0.75}, {0, 0, 1}, {0.5, 0.5, 0}};
    write_states(dir / "z.csv", t, z, {});
    write_posteriors(dir / "p.csv", t, z, {});
    CHECK(read_csv(dir / "z.csv").numeric("z") == std::vector<double>{1, 3, 3, 2});
    auto back = read_states(dir / "z.csv");
    CHECK(back.states.indicators == z.indicators);
    read_posteriors(dir / "p.csv", back.states);
    CHECK(back.states.posteriors == z.posteriors);

    write_scalar(dir / "v.csv", t, ScalarSeries{2.0, {0.1, -0.2, 0.3, 0.4}, ScalarUnit::Raw}, {});
    const auto s = read_scalar(dir / "v.csv");
    CHECK(s.series.rate == doctest::Approx(2.0));
    CHECK(s.series.values == std::vector<double>{0.1, -0.2, 0.3, 0.4});
    CHECK(s.times == t);
  }

  TEST_CASE("truth lookup from labels and from schedules") {
    ScratchDir dir("truth");
    write_text(dir / "u.csv", "t,u\n0,1\n1,2\n2,1\n");
    const auto u = read_truth_at(dir / "u.csv", {0.0, 0.5, 1.0, 1.99, 5.0});
    CHECK(u == AdherenceLabels{Adherence::Adherence, Adherence::Adherence, Adherence::Violation,
                               Adherence::Violation, Adherence::Adherence});
    write_text(dir / "bad.csv", "t,u\n0,3\n");
    CHECK(error_of([&] { read_truth_at(dir / "bad.csv", {0.0}); }).code() == ErrorCode::Format);

    const TruthSchedule sch{{{0, 0.0, 2.0}, {1, 2.0, 3.0}}, {"walking", "standing"},
                            {Adherence::Adherence, Adherence::Violation}};
    write_schedule(dir / "s.csv", sch, {});
    const auto v = read_truth_at(dir / "s.csv", {0.1, 1.999, 2.0, 10.0});
    CHECK(v == AdherenceLabels{Adherence::Adherence, Adherence::Adherence, Adherence::Violation,
                               Adherence::Violation});
  }
}

TEST_SUITE("json") {
  TEST_CASE("models round-trip") {
    ScratchDir dir("json");
    SwitchingArModel m;
    m.order = 1;
    m.truncation = 2;
    m.states = {ArState{{0.5}, 0.1, 0.2}, ArState{{-0.25}, 3.0, 1.0 / 3.0}};
    m.transition = {0.9, 0.1, 0.2, 0.8};
    m.beta = {0.6, 0.4};
    m.kappa = 5.0;
    m.seed = 77;
    m.prior.center = 1.25;
    write_json(dir / "m.json", to_json(m), {"0123456789abcdef", 7});
    const auto j = read_json(dir / "m.json");
    CHECK(j.at("config_hash") == "0123456789abcdef");
    const SwitchingArModel b = switching_ar_from_json(j);
    CHECK(b.transition == m.transition);
    CHECK(b.beta == m.beta);
    CHECK(b.states[1].variance == m.states[1].variance);
    CHECK(b.states[1].coefficients == m.states[1].coefficients);
    CHECK(b.kappa == 5.0);
    CHECK(b.seed == 77);
    CHECK(b.prior.center == 1.25);

    NaiveBayesModel nb;
    nb.attribute_states = {0, 3};
    nb.probabilities = {std::vector<double>{0.75, 0.25}, std::vector<double>{1.0 / 6.0, 5.0 / 6.0}};
    nb.priors = {0.3, 0.7};
    const NaiveBayesModel nb2 = naive_bayes_from_json(to_json(nb));
    CHECK(nb2.attribute_states == nb.attribute_states);
    CHECK(nb2.probabilities == nb.probabilities);
    CHECK(nb2.priors == nb.priors);

    const GmmParams g{{0.1, 5.0}, {1.0, 2.0}, {0.4, 0.6}};
    const GmmParams g2 = gmm_from_json(to_json(g));
    CHECK(g2.means == g.means);
    CHECK(g2.weights == g.weights);
  }

  TEST_CASE("documents are checked for type and version") {
    const GmmParams g{{0.1, 5.0}, {1.0, 2.0}, {0.4, 0.6}};
    CHECK(error_of([&] { naive_bayes_from_json(to_json(g)); }).code() == ErrorCode::Format);
    auto j = to_json(g);
    j["version"] = 99;
    CHECK(error_of([&] { gmm_from_json(j); }).code() == ErrorCode::Format);
    CHECK(error_of([&] { gmm_from_json(nlohmann::json::object()); }).code() == ErrorCode::Format);
  }

  TEST_CASE("metrics keep undefined values as null") {
    FoldMetrics f;
    f.tp = 0.5;
    f.size = 10;
    const auto j = to_json(f);
    CHECK(j.at("tp") == 0.5);
    CHECK(j.at("tn").is_null());
    CHECK(j.at("ba").is_null());
  }
}

TEST_SUITE("config") {
  TEST_CASE("json round-trip preserves the hash") {
    PipelineConfig c;
    c.kind = TestKind::Voice;
    c.model = ModelChoice::Gmm;
    c.hdp.kappa = 12.5;
    c.trend.lambda = 3.0;
    c.cv.strategy = FoldStrategy::Shuffled;
    c.seed = 99;
    const PipelineConfig d = pipeline_config_from_json(to_json(c));
    CHECK(pipeline_config_hash(d) == pipeline_config_hash(c));
    CHECK(to_json(d) == to_json(c));
  }

  TEST_CASE("the hash ignores the output directory but not the seed") {
    PipelineConfig a;
    PipelineConfig b = a;
    b.out_dir = "/somewhere/else";
    CHECK(pipeline_config_hash(a) == pipeline_config_hash(b));
    b.seed = 1;
    CHECK(pipeline_config_hash(a) != pipeline_config_hash(b));
    CHECK(pipeline_config_hash(a).size() == 16);
  }

  TEST_CASE("unknown keys are rejected at every level") {
    CHECK(error_of([] { pipeline_config_from_json({{"sede", 1}}); }).code() == ErrorCode::Format);
    CHECK(error_of([] { pipeline_config_from_json({{"hdp", {{"sweep", 1}}}}); }).code() == ErrorCode::Format);
    CHECK(error_of([] { pipeline_config_from_json({{"seed", "one"}}); }).code() == ErrorCode::Format);
    CHECK(error_of([] { pipeline_config_from_json({{"kind", "running"}}); }).code() == ErrorCode::InvalidArgument);
  }

  TEST_CASE("stage seeds are distinct named streams") {
    PipelineConfig c;
    c.seed = 5;
    CHECK(stage_seed(c, "gmm") != stage_seed(c, "hdp-ar"));
    CHECK(stage_seed(c, "gmm") == derive_seed(5, "gmm"));
  }

  TEST_CASE("validation") {
    PipelineConfig c;
    c.decimation = 0;
    CHECK(error_of([&] { c.validate(); }).code() == ErrorCode::InvalidArgument);
  }
}

TEST_SUITE("recipes") {
  TEST_CASE("walking features are 30 Hz, balance 120 Hz") {
    for (auto [scenario, kind, rate] : {std::tuple{Scenario::WalkingLike, TestKind::Walking, 30.0},
                                        std::tuple{Scenario::BalanceLike, TestKind::Balance, 120.0}}) {
      SynthSpec spec = make_spec(scenario, 1);
      spec.duration = 30.0;
      spec.schedule = {{0, 0.0, 30.0}};
      const auto rec = gen_recording(spec);
      PipelineConfig c;
      c.kind = kind;
      c.keep_intermediates = true;
      RawRecording raw;
      raw.accel = rec.accel;
      const auto pre = preprocess_recipe(c, raw);
      CHECK(pre.feature.rate == rate);
      CHECK(pre.times.size() == pre.feature.size());
      CHECK(pre.times.front() == rec.accel.timestamps.front());
      CHECK(pre.times[1] - pre.times[0] == doctest::Approx(1.0 / rate));
      CHECK(pre.decomposition.has_value());
      CHECK(pre.feature.size() == doctest::Approx(30.0 * rate).epsilon(0.01));
    }
  }

  TEST_CASE("voice frames are 10 ms, timestamped at their centres") {
    const auto rec = gen_recording(make_spec(Scenario::VoiceLike, 2));
    PipelineConfig c;
    c.kind = TestKind::Voice;
    RawRecording raw;
    raw.audio = rec.audio;
    raw.audio_start = 1.0;
    const auto pre = preprocess_recipe(c, raw);
    CHECK(pre.feature.size() == 2000);
    CHECK(pre.feature.rate == doctest::Approx(100.0));
    CHECK(pre.times.front() == doctest::Approx(1.005));
    CHECK(pre.times.back() == doctest::Approx(1.0 + 19.995));
  }

  TEST_CASE("stage errors carry the stage name") {
    PipelineConfig c;
    c.kind = TestKind::Voice;
    RawRecording raw;
    raw.audio = ScalarSeries{44100.0, std::vector<double>(100, 0.1), ScalarUnit::Raw};
    const Error e = error_of([&] { preprocess_recipe(c, raw); });
    CHECK(e.code() == ErrorCode::WindowLargerThanInput);
    const std::string msg = e.what();
    CHECK(msg.rfind("WindowLargerThanInput: windowed_energy: ", 0) == 0);

    c.kind = TestKind::Walking;
    RawRecording bad;
    bad.accel = {{0.0, 0.01, 0.005, 0.02, 0.03}, std::vector<Vec3>(5, Vec3{0, 0, 9.81})};
    const Error f = error_of([&] { preprocess_recipe(c, bad); });
    CHECK(f.code() == ErrorCode::NonMonotonicTimestamps);
    CHECK(std::string(f.what()).find("interpolate_uniform: ") != std::string::npos);
  }
}

TEST_CASE("file pipeline writes every artifact with provenance") {
  ScratchDir dir("pipeline");
  SynthSpec spec = make_spec(Scenario::BalanceLike, 3);
  const auto rec = gen_recording(spec);
  write_triaxial(dir / "raw.csv", rec.accel, {});
  write_schedule(dir / "truth.csv", {rec.schedule, rec.behaviours, rec.adherence}, {});

  PipelineConfig c;
  c.kind = TestKind::Balance;
  c.model = ModelChoice::Gmm;
  c.input = dir / "raw.csv";
  c.truth = dir / "truth.csv";
  c.out_dir = dir / "out";
  c.seed = 4;
  const auto r = run_pipeline_files(c);
  REQUIRE(r.report.has_value());
  CHECK(r.report->ba_mean.value_or(0.0) >= 0.9);
  const std::string head = "# qcseg config=" + pipeline_config_hash(c) + " seed=4";
  for (const char* f : {"feature.csv", "states.csv", "labels.csv"}) {
    CAPTURE(f);
    REQUIRE(fs::exists(dir / "out" / f));
    CHECK(read_text(dir / "out" / f).rfind(head, 0) == 0);
  }
  const auto report = read_json(dir / "out" / "report.json");
  CHECK(report.at("type") == "metrics");
  CHECK(report.at("config_hash") == pipeline_config_hash(c));
  CHECK(report.at("config").at("seed") == 4);
  CHECK(fs::exists(dir / "out" / "gmm.json"));

  // The same run into another directory produces identical bytes.
  PipelineConfig c2 = c;
  c2.out_dir = dir / "out2";
  run_pipeline_files(c2);
  for (const char* f : {"feature.csv", "states.csv", "labels.csv", "report.json", "gmm.json"}) {
    CAPTURE(f);
    CHECK(read_text(dir / "out" / f) == read_text(dir / "out2" / f));
  }
}
