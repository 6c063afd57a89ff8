#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Sandbox {
 public:
  explicit Sandbox(const std::string& name) : dir_(fs::temp_directory_path() / ("qcseg-test-cli-" + name)) {
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  ~Sandbox() { fs::remove_all(dir_); }

  fs::path operator/(const std::string& f) const { return dir_ / f; }

  // Runs the CLI with `args` from inside the sandbox; `env` is prepended to
  // the command line.
  Result run(const std::string& args, const std::string& env = "") const {
    const fs::path out = dir_ / ".stdout", err = dir_ / ".stderr";
    const std::string cmd = "cd '" + dir_.string() + "' && " + env + " '" QCSEG_CLI "' " + args + " >'" +
                            out.string() + "' 2>'" + err.string() + "'";
    const int status = std::system(cmd.c_str());
    Result r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
  }

 private:
  fs::path dir_;
};

}  // namespace

TEST_SUITE("exit codes") {
  TEST_CASE("help and usage errors") {
    Sandbox box("usage");
    CHECK(box.run("--help").code == 0);
    CHECK(box.run("synth --help").code == 0);
    CHECK(box.run("").code == 2);
    CHECK(box.run("bogus").code == 2);
    CHECK(box.run("synth --scenario jogging").code == 2);
    CHECK(box.run("synth").code == 2);
  }

  TEST_CASE("a missing input file is a validation error naming the path") {
    Sandbox box("missing");
    const Result r = box.run("preprocess --kind walking --input nowhere.csv");
    CHECK(r.code == 2);
    CHECK(r.err.find("nowhere.csv") != std::string::npos);
  }

  TEST_CASE("malformed input is a validation error") {
    Sandbox box("malformed");
    std::ofstream(box / "raw.csv") << "t,x,y\n0,1,2\n";
    const Result r = box.run("preprocess --kind walking --input raw.csv");
    CHECK(r.code == 2);
    CHECK(r.err.find("Format") != std::string::npos);
  }

  TEST_CASE("an unknown config key is a validation error") {
    Sandbox box("config");
    std::ofstream(box / "cfg.json") << R"({"kind": "walking", "sweeps": 3})";
    const Result r = box.run("synth --scenario two-cluster --config cfg.json");
    CHECK(r.code == 2);
    CHECK(r.err.find("sweeps") != std::string::npos);
  }

  TEST_CASE("a runtime failure exits with 3") {
    Sandbox box("runtime");
    {
      std::ofstream f(box / "flat.csv");
      f << "t,v\n";
      for (int i = 0; i < 300; ++i) f << i / 30.0 << ",1\n";
    }
    const Result r = box.run("segment-gmm --kind walking --input flat.csv");
    CHECK(r.code == 3);
    CHECK(!r.err.empty());
  }
}

TEST_CASE("mixture segmentation of a synthetic two-cluster series") {
  Sandbox box("gmm");
  REQUIRE(box.run("synth --scenario two-cluster --seed 3 --out data").code == 0);
  const Result r = box.run("segment-gmm --kind walking --input data/series.csv --truth data/truth.csv --out seg");
  CHECK(r.code == 0);
  CHECK(fs::exists(box / "seg/labels.csv"));
  CHECK(fs::exists(box / "seg/gmm.json"));
  const auto report = nlohmann::json::parse(slurp(box / "seg/report.json"));
  CHECK(report.at("mean").at("ba").get<double>() >= 0.95);
}

TEST_CASE("segment, train, classify, evaluate and spectrum chain") {
  Sandbox box("chain");
  REQUIRE(box.run("synth --scenario two-cluster --seed 1 --out data").code == 0);
  const std::string sampler = "--order 1 --truncation 5 --sweeps 20 --burn-in 10";
  Result r = box.run("segment-ar --input data/series.csv --out ar --seed 2 " + sampler);
  REQUIRE(r.code == 0);
  for (const char* f : {"states.csv", "posteriors.csv", "model.json", "trace.csv"}) {
    CAPTURE(f);
    CHECK(fs::exists(box / "ar" / f));
  }
  r = box.run("train-nb --states ar/states.csv --posteriors ar/posteriors.csv --truth data/truth.csv --out nb");
  REQUIRE(r.code == 0);
  CHECK(fs::exists(box / "nb/nb.json"));
  r = box.run("classify --states ar/states.csv --posteriors ar/posteriors.csv --model nb/nb.json --out cls");
  REQUIRE(r.code == 0);
  const std::string pred = slurp(box / "cls/predictions.csv");
  CHECK(pred.find("t,u,confidence") != std::string::npos);

  r = box.run("evaluate --predictions cls/predictions.csv --truth data/truth.csv --out ev1");
  CHECK(r.code == 0);
  r = box.run("evaluate --states ar/states.csv --truth data/truth.csv --baseline shuffled --repeats 3 --out ev2");
  CHECK(r.code == 0);
  const auto report = nlohmann::json::parse(slurp(box / "ev2/report.json"));
  CHECK(report.at("folds") == 10);
  CHECK(report.contains("baseline"));

  r = box.run("spectrum --model ar/model.json --state 1 --bins 64 --out sp");
  CHECK(r.code == 0);
  CHECK(fs::exists(box / "sp/spectrum.csv"));
  r = box.run("spectrum --input data/series.csv --segment-seconds 8 --out sp2");
  CHECK(r.code == 0);
  r = box.run("spectrum --model ar/model.json --state 99");
  CHECK(r.code == 2);
}

TEST_CASE("output directory from the environment and from the config") {
  Sandbox box("outdir");
  CHECK(box.run("synth --scenario two-cluster", "QCSEG_OUT_DIR=envdir").code == 0);
  CHECK(fs::exists(box / "envdir/series.csv"));
  std::ofstream(box / "cfg.json") << R"({"out_dir": "cfgdir", "seed": 4})";
  CHECK(box.run("synth --scenario two-cluster --config cfg.json", "QCSEG_OUT_DIR=envdir2").code == 0);
  CHECK(fs::exists(box / "cfgdir/series.csv"));
  CHECK(!fs::exists(box / "envdir2"));
  CHECK(box.run("synth --scenario two-cluster --config cfg.json --out flagdir").code == 0);
  CHECK(fs::exists(box / "flagdir/series.csv"));
  CHECK(slurp(box / "cfgdir/series.csv") == slurp(box / "flagdir/series.csv"));
  CHECK(slurp(box / "cfgdir/series.csv") != slurp(box / "envdir/series.csv"));
}
