// Command-line front end. Every subcommand accepts --config with a pipeline
// config document; flags given on the command line take precedence.

#include <CLI11.hpp>
#include <fmt/format.h>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>

#include "qcseg/context.hpp"
#include "qcseg/error.hpp"
#include "qcseg/evaluation.hpp"
#include "qcseg/gmm.hpp"
#include "qcseg/hdp_ar.hpp"
#include "qcseg/io.hpp"
#include "qcseg/pipeline.hpp"
#include "qcseg/signal.hpp"
#include "qcseg/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace qcseg;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;

// Options shared by every subcommand. Unset optionals leave the config value
// alone.
struct Common {
  std::string config_path;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> kind;
  std::optional<std::string> input;
  std::optional<std::string> truth;
};

void add_common(CLI::App* app, Common& c, bool with_kind) {
  app->add_option("--config", c.config_path, "JSON pipeline config; flags override it")->check(CLI::ExistingFile);
  app->add_option("--out", c.out, "Output directory (default: $QCSEG_OUT_DIR or .)");
  app->add_option("--seed", c.seed, "Root seed");
  if (with_kind) {
    app->add_option("--kind", c.kind, "Test kind")->check(CLI::IsMember({"walking", "balance", "voice"}));
  }
}

template <typename T, typename U>
void set_if(const std::optional<T>& flag, U& field) {
  if (flag) field = static_cast<U>(*flag);
}

PipelineConfig load_config(const Common& c) {
  PipelineConfig cfg;
  bool out_from_config = false;
  if (!c.config_path.empty()) {
    const json doc = read_json(c.config_path);
    cfg = pipeline_config_from_json(doc);
    out_from_config = doc.contains("out_dir");
  }
  if (!out_from_config) {
    if (const char* env = std::getenv("QCSEG_OUT_DIR"); env && *env) cfg.out_dir = env;
  }
  if (c.out) cfg.out_dir = *c.out;
  set_if(c.seed, cfg.seed);
  if (c.kind) cfg.kind = test_kind_from_string(*c.kind);
  if (c.input) cfg.input = *c.input;
  if (c.truth) cfg.truth = *c.truth;
  return cfg;
}

// Fingerprint of the effective config plus subcommand-specific extras.
Provenance provenance(const PipelineConfig& cfg, const std::string& command, json extra = json::object()) {
  json j = to_json(cfg);
  j.erase("out_dir");
  j["command"] = command;
  j["extra"] = std::move(extra);
  return {config_hash(j), cfg.seed};
}

void require_input(const PipelineConfig& cfg) {
  if (cfg.input.empty()) throw Error(ErrorCode::InvalidArgument, "--input is required");
}

void say(const std::string& line) { std::cout << line << '\n'; }

std::string fmt_opt(const std::optional<double>& v) { return v ? fmt::format("{:.4f}", *v) : std::string("undefined"); }

// preprocess -------------------------------------------------------------

struct PreprocessFlags {
  std::optional<double> lambda, target_rate, cutoff;
  std::optional<std::size_t> decimation, energy_window;
  bool keep = false;
  bool squared = false;
};

void cmd_preprocess(const Common& c, const PreprocessFlags& f) {
  PipelineConfig cfg = load_config(c);
  if (f.lambda) cfg.trend.lambda = *f.lambda;
  set_if(f.target_rate, cfg.target_rate);
  set_if(f.cutoff, cfg.cutoff_hz);
  set_if(f.decimation, cfg.decimation);
  set_if(f.energy_window, cfg.energy_window);
  if (f.keep) cfg.keep_intermediates = true;
  if (f.squared) cfg.squared_energy = true;
  require_input(cfg);
  const Provenance p = provenance(cfg, "preprocess");
  const PreprocessResult pre = preprocess_recipe(cfg, read_recording(cfg.kind, cfg.input));
  write_scalar(cfg.out_dir / "feature.csv", pre.times, pre.feature, p);
  if (cfg.keep_intermediates) write_intermediates(cfg.out_dir, pre, p);
  say(fmt::format("feature: {} samples at {} Hz -> {}", pre.feature.size(), pre.feature.rate,
                  (cfg.out_dir / "feature.csv").string()));
  if (!pre.trend_converged) say("warning: gravity trend solver did not reach its tolerance");
}

// segment-gmm ------------------------------------------------------------

struct GmmFlags {
  std::optional<double> window_seconds;
  std::optional<std::string> metric;
};

json report_document(const MetricsReport& r, const PipelineConfig& cfg) {
  json doc = to_json(r);
  doc["config"] = to_json(cfg);
  doc["config"].erase("out_dir");
  return doc;
}

void print_report(const MetricsReport& r, const char* title) {
  say(fmt::format("{}: BA {} (std {}), TP {}, TN {}, {} of {} folds undefined", title, fmt_opt(r.ba_mean),
                  fmt_opt(r.ba_std), fmt_opt(r.tp_mean), fmt_opt(r.tn_mean), r.undefined_folds, r.k));
}

void cmd_segment_gmm(const Common& c, const GmmFlags& f) {
  PipelineConfig cfg = load_config(c);
  cfg.model = ModelChoice::Gmm;
  set_if(f.window_seconds, cfg.median_window_seconds);
  if (f.metric) cfg.cv.definition = metric_definition_from_string(*f.metric);
  require_input(cfg);
  const Provenance p = provenance(cfg, "segment-gmm");
  const TimedSeries in = read_scalar(cfg.input);
  PreprocessResult pre;
  pre.feature = in.series;
  pre.times = in.times;
  std::optional<AdherenceLabels> truth;
  if (!cfg.truth.empty()) truth = read_truth_at(cfg.truth, in.times);
  const PipelineResult r = run_on_feature(cfg, std::move(pre), truth);
  write_labels(cfg.out_dir / "labels.csv", in.times, r.labels, {}, p);
  write_states(cfg.out_dir / "states.csv", in.times, r.states, p);
  write_json(cfg.out_dir / "gmm.json", to_json(r.gmm->fit.params), p);
  say(fmt::format("mixture means {:.6g} / {:.6g}, median window {} samples", r.gmm->fit.params.means[0],
                  r.gmm->fit.params.means[1], default_median_window(in.series.rate, cfg.median_window_seconds)));
  if (r.report) {
    write_json(cfg.out_dir / "report.json", report_document(*r.report, cfg), p);
    print_report(*r.report, "recording");
  }
}

// segment-ar -------------------------------------------------------------

struct ArFlags {
  std::optional<int> order, truncation, sweeps, burn_in;
  std::optional<double> alpha, gamma, kappa;
};

void cmd_segment_ar(const Common& c, const ArFlags& f) {
  PipelineConfig cfg = load_config(c);
  set_if(f.order, cfg.hdp.order);
  set_if(f.truncation, cfg.hdp.truncation);
  set_if(f.sweeps, cfg.hdp.sweeps);
  set_if(f.burn_in, cfg.hdp.burn_in);
  set_if(f.alpha, cfg.hdp.alpha);
  set_if(f.gamma, cfg.hdp.gamma);
  set_if(f.kappa, cfg.hdp.kappa);
  require_input(cfg);
  cfg.validate();
  const Provenance p = provenance(cfg, "segment-ar");
  const TimedSeries in = read_scalar(cfg.input);
  HdpArConfig h = cfg.hdp;
  h.seed = stage_seed(cfg, "hdp-ar");
  const HdpArFit fit = fit_hdp_ar(in.series, h);
  write_states(cfg.out_dir / "states.csv", in.times, fit.states, p);
  write_posteriors(cfg.out_dir / "posteriors.csv", in.times, fit.states, p);
  write_json(cfg.out_dir / "model.json", to_json(fit.model), p);
  std::vector<double> sweep, occupied;
  for (std::size_t i = 0; i < fit.loglik_trace.size(); ++i) {
    sweep.push_back(static_cast<double>(i + 1));
    occupied.push_back(static_cast<double>(fit.occupied_trace[i]));
  }
  write_csv(cfg.out_dir / "trace.csv", {"sweep", "loglik", "occupied"}, {sweep, fit.loglik_trace, occupied}, p);
  say(fmt::format("{} sweeps, K+ mode {} after burn-in, best complete-data log-likelihood {:.6g}", h.sweeps,
                  fit.occupied_mode(h.burn_in), fit.best_loglik));
}

// train-nb / classify / evaluate share the state-sequence input ----------

struct StatesInput {
  std::string states;
  std::string posteriors;
  std::optional<int> state_count;
  std::optional<int> scale;
  std::optional<double> smoothing;
  bool one_hot = false;
};

void add_states_input(CLI::App* app, StatesInput& s) {
  app->add_option("--states", s.states, "State sequence CSV (t,z)")->check(CLI::ExistingFile)->required();
  app->add_option("--posteriors", s.posteriors, "Posterior CSV (t,p1..pL)")->check(CLI::ExistingFile);
  app->add_option("--state-count", s.state_count, "Size of the state space (default: inferred)");
  app->add_option("--scale", s.scale, "Count rescaling factor");
  app->add_option("--smoothing", s.smoothing, "Additive smoothing");
  app->add_flag("--one-hot", s.one_hot, "Ignore posteriors and use one-hot indicator counts");
}

struct LoadedStates {
  TimedStates z;
  int state_count = 0;
  std::vector<CountVector> inputs;
};

LoadedStates load_states(const StatesInput& s, PipelineConfig& cfg) {
  set_if(s.scale, cfg.count_scale);
  set_if(s.smoothing, cfg.nb_smoothing);
  if (s.one_hot) cfg.use_posteriors = false;
  cfg.validate();
  LoadedStates out;
  out.z = read_states(s.states);
  if (!s.posteriors.empty()) read_posteriors(s.posteriors, out.z.states);
  int count = 0;
  for (int v : out.z.states.indicators) count = std::max(count, v + 1);
  if (!out.z.states.posteriors.empty()) {
    count = std::max(count, static_cast<int>(out.z.states.posteriors.front().size()));
  }
  if (s.state_count) {
    if (*s.state_count < count) throw Error(ErrorCode::InvalidArgument, "--state-count is below the largest state id");
    count = *s.state_count;
  }
  out.state_count = count;
  out.inputs = counts_from_states(out.z.states, count, cfg.count_scale, cfg.use_posteriors);
  return out;
}

json states_extra(const StatesInput& s) {
  return {{"states", s.states}, {"posteriors", s.posteriors}, {"state_count", s.state_count.value_or(0)}};
}

void cmd_train_nb(const Common& c, const StatesInput& s) {
  PipelineConfig cfg = load_config(c);
  if (cfg.truth.empty()) throw Error(ErrorCode::InvalidArgument, "--truth is required");
  const LoadedStates in = load_states(s, cfg);
  const Provenance p = provenance(cfg, "train-nb", states_extra(s));
  const AdherenceLabels truth = read_truth_at(cfg.truth, in.z.times);
  const NaiveBayesModel model = nb_train(in.inputs, truth, cfg.nb_smoothing);
  write_json(cfg.out_dir / "nb.json", to_json(model), p);
  say(fmt::format("naive Bayes over {} attribute states, priors {:.4f} / {:.4f}", model.attribute_states.size(),
                  model.priors[0], model.priors[1]));
}

void cmd_classify(const Common& c, const StatesInput& s, const std::string& model_path) {
  PipelineConfig cfg = load_config(c);
  const LoadedStates in = load_states(s, cfg);
  json extra = states_extra(s);
  extra["model"] = model_path;
  const Provenance p = provenance(cfg, "classify", extra);
  const NaiveBayesModel model = naive_bayes_from_json(read_json(model_path));
  AdherenceLabels labels;
  std::vector<double> confidence;
  for (const auto& x : in.inputs) {
    const NbPrediction pred = nb_predict(model, x);
    labels.push_back(pred.label);
    confidence.push_back(pred.confidence());
  }
  write_labels(cfg.out_dir / "predictions.csv", in.z.times, labels, confidence, p);
  say(fmt::format("{} predictions -> {}", labels.size(), (cfg.out_dir / "predictions.csv").string()));
}

struct EvaluateFlags {
  std::string predictions;
  std::optional<int> folds;
  std::optional<std::string> strategy, metric, baseline;
  int repeats = 1;
};

void cmd_evaluate(const Common& c, const StatesInput& s, const EvaluateFlags& f) {
  PipelineConfig cfg = load_config(c);
  set_if(f.folds, cfg.cv.folds);
  if (f.strategy) cfg.cv.strategy = fold_strategy_from_string(*f.strategy);
  if (f.metric) cfg.cv.definition = metric_definition_from_string(*f.metric);
  if (cfg.truth.empty()) throw Error(ErrorCode::InvalidArgument, "--truth is required");
  if (f.repeats < 1) throw Error(ErrorCode::InvalidArgument, "--repeats must be >= 1");

  json extra = {{"predictions", f.predictions}, {"baseline", f.baseline.value_or("")}, {"repeats", f.repeats}};
  if (!f.predictions.empty()) {
    // Score an existing prediction file directly.
    cfg.validate();
    const Provenance p = provenance(cfg, "evaluate", extra);
    const TimedLabels pred = read_labels(f.predictions);
    const AdherenceLabels truth = read_truth_at(cfg.truth, pred.times);
    MetricsReport r = summarize({tp_tn_ba(pred.labels, truth, cfg.cv.definition)});
    r.definition = cfg.cv.definition;
    write_json(cfg.out_dir / "report.json", report_document(r, cfg), p);
    print_report(r, "predictions");
    return;
  }

  if (s.states.empty()) throw Error(ErrorCode::InvalidArgument, "--states or --predictions is required");
  const LoadedStates in = load_states(s, cfg);
  extra.update(states_extra(s));
  const Provenance p = provenance(cfg, "evaluate", extra);
  const AdherenceLabels truth = read_truth_at(cfg.truth, in.z.times);
  CvOptions cv = cfg.cv;
  cv.seed = stage_seed(cfg, "cv");
  const MetricsReport r = kfold_cv(truth, naive_bayes_pipeline(in.inputs, truth, cfg.nb_smoothing), cv);
  json doc = report_document(r, cfg);
  print_report(r, "cross-validation");
  if (f.baseline) {
    if (*f.baseline != "shuffled") throw Error(ErrorCode::InvalidArgument, "--baseline must be 'shuffled'");
    json runs = json::array();
    for (int rep = 0; rep < f.repeats; ++rep) {
      const std::uint64_t shuffle_seed = derive_seed(cfg.seed, fmt::format("shuffled-baseline-{}", rep));
      const MetricsReport b = shuffled_baseline(in.inputs, truth, cv, shuffle_seed, cfg.nb_smoothing);
      json entry = to_json(b);
      entry["shuffle_seed"] = shuffle_seed;
      runs.push_back(std::move(entry));
      print_report(b, fmt::format("shuffled baseline {}", rep + 1).c_str());
    }
    doc["baseline"] = {{"kind", "shuffled"}, {"runs", std::move(runs)}};
  }
  write_json(cfg.out_dir / "report.json", std::move(doc), p);
}

// synth ------------------------------------------------------------------

void cmd_synth(const Common& c, const std::string& scenario_name) {
  PipelineConfig cfg = load_config(c);
  const Scenario scenario = scenario_from_string(scenario_name);
  const Provenance p = provenance(cfg, "synth", {{"scenario", scenario_name}});
  const SynthSpec spec = make_spec(scenario, cfg.seed);
  const fs::path& dir = cfg.out_dir;
  const std::size_t n = spec.samples();
  const auto uniform_times = [&] {
    std::vector<double> t(n);
    for (std::size_t i = 0; i < n; ++i) t[i] = static_cast<double>(i) / spec.rate;
    return t;
  };

  switch (scenario) {
    case Scenario::WalkingLike:
    case Scenario::BalanceLike:
    case Scenario::VoiceLike: {
      const SynthRecording rec = gen_recording(spec);
      if (rec.kind == TestKind::Voice) {
        write_scalar(dir / "raw.csv", uniform_times(), rec.audio, p);
      } else {
        write_triaxial(dir / "raw.csv", rec.accel, p);
      }
      write_schedule(dir / "truth.csv", {rec.schedule, rec.behaviours, rec.adherence}, p);
      break;
    }
    case Scenario::SwitchingAr: {
      const SimulatedPath path = gen_switching_ar(spec, default_switching_states());
      const auto t = uniform_times();
      write_scalar(dir / "series.csv", t, path.series, p);
      write_states(dir / "truth_states.csv", t, path.truth, p);
      break;
    }
    case Scenario::GravityDrift: {
      const GravityDriftData d = gen_gravity_drift(spec);
      write_triaxial(dir / "raw.csv", d.raw, p);
      write_decomposition(dir / "truth_decomposition.csv", d.raw.timestamps, d.gravity, d.dynamic, p);
      break;
    }
    case Scenario::TwoCluster: {
      const TwoClusterData d = gen_two_cluster(spec);
      const auto t = uniform_times();
      write_scalar(dir / "series.csv", t, d.series, p);
      write_labels(dir / "truth.csv", t, d.labels, {}, p);
      break;
    }
  }
  say(fmt::format("{}: {:.0f} s at {} Hz -> {}", scenario_name, spec.duration, spec.rate, dir.string()));
}

// spectrum ---------------------------------------------------------------

struct SpectrumFlags {
  std::string model;
  int state = 1;
  int bins = 512;
  double segment_seconds = 4.0;
  double overlap = 0.5;
  std::string window = "hann";
};

void cmd_spectrum(const Common& c, const SpectrumFlags& f) {
  PipelineConfig cfg = load_config(c);
  const Provenance p = provenance(cfg, "spectrum",
                                  {{"model", f.model},
                                   {"state", f.state},
                                   {"bins", f.bins},
                                   {"segment_seconds", f.segment_seconds},
                                   {"overlap", f.overlap},
                                   {"window", f.window}});
  const fs::path out = cfg.out_dir / "spectrum.csv";
  if (!f.model.empty()) {
    const SwitchingArModel m = switching_ar_from_json(read_json(f.model));
    if (f.state < 1 || f.state > m.truncation) throw Error(ErrorCode::InvalidArgument, "--state is out of range");
    if (f.bins < 1) throw Error(ErrorCode::InvalidArgument, "--bins must be >= 1");
    std::vector<double> freqs(static_cast<std::size_t>(f.bins));
    for (int k = 0; k < f.bins; ++k) freqs[static_cast<std::size_t>(k)] = 0.5 * k / f.bins;
    write_spectrum(out, ar_psd(m.states[static_cast<std::size_t>(f.state - 1)], freqs), p);
  } else {
    require_input(cfg);
    const TimedSeries in = read_scalar(cfg.input);
    WelchOptions w;
    if (!(f.segment_seconds > 0.0)) throw Error(ErrorCode::InvalidArgument, "--segment-seconds must be > 0");
    w.segment_length = static_cast<std::size_t>(std::llround(f.segment_seconds * in.series.rate));
    w.overlap = f.overlap;
    w.window = f.window == "rectangular" ? SpectralWindow::Rectangular : SpectralWindow::Hann;
    write_spectrum(out, power_spectrum(in.series, w), p);
  }
  say(fmt::format("spectrum -> {}", out.string()));
}

// run --------------------------------------------------------------------

struct RunFlags {
  std::optional<std::string> model;
  bool keep = false;
};

void cmd_run(const Common& c, const RunFlags& f) {
  PipelineConfig cfg = load_config(c);
  if (f.model) cfg.model = model_choice_from_string(*f.model);
  if (f.keep) cfg.keep_intermediates = true;
  const PipelineResult r = run_pipeline_files(cfg);
  say(fmt::format("{} feature samples, {} labels -> {}", r.pre.feature.size(), r.labels.size(),
                  cfg.out_dir.string()));
  if (r.report) print_report(*r.report, cfg.model == ModelChoice::Gmm ? "recording" : "cross-validation");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Protocol-adherence segmentation for sensor-based clinimetric tests"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "qcseg 1.0");

  Common common;

  auto* pre = app.add_subcommand("preprocess", "Raw recording to a one-dimensional feature");
  PreprocessFlags pf;
  add_common(pre, common, true);
  pre->add_option("--input", common.input, "Raw CSV: t,x,y,z (walking, balance) or t,v audio (voice)")->check(CLI::ExistingFile);
  pre->add_option("--lambda", pf.lambda, "Trend-filter regularization (default scales with the series)");
  pre->add_option("--target-rate", pf.target_rate, "Interpolation rate in Hz");
  pre->add_option("--cutoff", pf.cutoff, "Walking low-pass cutoff in Hz");
  pre->add_option("--decimation", pf.decimation, "Walking downsampling factor");
  pre->add_option("--energy-window", pf.energy_window, "Voice energy frame in samples");
  pre->add_flag("--squared-energy", pf.squared, "Sum of squares instead of root-sum-square");
  pre->add_flag("--keep-intermediates", pf.keep, "Also write the uniform and decomposed signals");

  auto* gmm = app.add_subcommand("segment-gmm", "Two-component mixture segmentation with median smoothing");
  GmmFlags gf;
  add_common(gmm, common, true);
  gmm->add_option("--input", common.input, "Feature CSV (t,v)")->check(CLI::ExistingFile);
  gmm->add_option("--truth", common.truth, "Optional truth labels or schedule for scoring")->check(CLI::ExistingFile);
  gmm->add_option("--window-seconds", gf.window_seconds, "Median filter span in seconds");
  gmm->add_option("--metric", gf.metric, "predictive or recall")->check(CLI::IsMember({"predictive", "recall"}));

  auto* ar = app.add_subcommand("segment-ar", "Nonparametric switching autoregressive segmentation");
  ArFlags af;
  add_common(ar, common, false);
  ar->add_option("--input", common.input, "Feature CSV (t,v)")->check(CLI::ExistingFile);
  ar->add_option("--order", af.order, "AR order");
  ar->add_option("--truncation", af.truncation, "Weak-limit state count L");
  ar->add_option("--sweeps", af.sweeps, "Gibbs sweeps");
  ar->add_option("--burn-in", af.burn_in, "Sweeps discarded before selecting the point estimate");
  ar->add_option("--alpha", af.alpha, "Local concentration");
  ar->add_option("--gamma", af.gamma, "Global concentration");
  ar->add_option("--kappa", af.kappa, "Sticky self-transition bias");

  auto* train = app.add_subcommand("train-nb", "Fit the naive Bayes state-to-label classifier");
  StatesInput train_in;
  add_common(train, common, false);
  add_states_input(train, train_in);
  train->add_option("--truth", common.truth, "Truth labels or schedule")->check(CLI::ExistingFile)->required();

  auto* classify = app.add_subcommand("classify", "Label every time point with a trained classifier");
  StatesInput classify_in;
  std::string model_path;
  add_common(classify, common, false);
  add_states_input(classify, classify_in);
  classify->add_option("--model", model_path, "nb.json from train-nb")->required()->check(CLI::ExistingFile);

  auto* eval = app.add_subcommand("evaluate", "Cross-validated metrics and the shuffled-indicator baseline");
  StatesInput eval_in;
  EvaluateFlags ef;
  add_common(eval, common, false);
  eval->add_option("--states", eval_in.states, "State sequence CSV (t,z)")->check(CLI::ExistingFile);
  eval->add_option("--posteriors", eval_in.posteriors, "Posterior CSV (t,p1..pL)")->check(CLI::ExistingFile);
  eval->add_option("--state-count", eval_in.state_count, "Size of the state space (default: inferred)");
  eval->add_option("--scale", eval_in.scale, "Count rescaling factor");
  eval->add_option("--smoothing", eval_in.smoothing, "Additive smoothing");
  eval->add_flag("--one-hot", eval_in.one_hot, "Ignore posteriors and use one-hot indicator counts");
  eval->add_option("--predictions", ef.predictions, "Score a prediction CSV (t,u) instead of running CV")->check(CLI::ExistingFile);
  eval->add_option("--truth", common.truth, "Truth labels or schedule")->check(CLI::ExistingFile)->required();
  eval->add_option("--folds", ef.folds, "Number of folds");
  eval->add_option("--strategy", ef.strategy, "blocks or shuffled")->check(CLI::IsMember({"blocks", "shuffled"}));
  eval->add_option("--metric", ef.metric, "predictive or recall")->check(CLI::IsMember({"predictive", "recall"}));
  eval->add_option("--baseline", ef.baseline, "Also run a baseline (shuffled)")->check(CLI::IsMember({"shuffled"}));
  eval->add_option("--repeats", ef.repeats, "Baseline repetitions with distinct shuffle seeds");

  auto* synth = app.add_subcommand("synth", "Generate a synthetic recording with ground truth");
  std::string scenario;
  add_common(synth, common, false);
  synth->add_option("--scenario", scenario, "Scenario name")
      ->required()
      ->check(CLI::IsMember(
          {"walking-like", "balance-like", "voice-like", "switching-ar", "gravity-drift", "two-cluster"}));

  auto* spec = app.add_subcommand("spectrum", "Welch periodogram of a feature or closed-form AR spectrum");
  SpectrumFlags sf;
  add_common(spec, common, false);
  spec->add_option("--input", common.input, "Feature CSV (t,v)")->check(CLI::ExistingFile);
  spec->add_option("--model", sf.model, "model.json from segment-ar; selects the closed form")
      ->check(CLI::ExistingFile);
  spec->add_option("--state", sf.state, "1-based state of the model");
  spec->add_option("--bins", sf.bins, "Closed-form grid size on [0, 1/2)");
  spec->add_option("--segment-seconds", sf.segment_seconds, "Welch segment length");
  spec->add_option("--overlap", sf.overlap, "Welch segment overlap fraction");
  spec->add_option("--window", sf.window, "hann or rectangular")->check(CLI::IsMember({"hann", "rectangular"}));

  auto* run = app.add_subcommand("run", "Whole pipeline from a config file");
  RunFlags rf;
  add_common(run, common, true);
  run->add_option("--input", common.input, "Raw recording CSV")->check(CLI::ExistingFile);
  run->add_option("--truth", common.truth, "Truth labels or schedule")->check(CLI::ExistingFile);
  run->add_option("--model", rf.model, "gmm or switching-ar")->check(CLI::IsMember({"gmm", "switching-ar"}));
  run->add_flag("--keep-intermediates", rf.keep, "Also write the preprocessing intermediates");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  try {
    if (*pre) cmd_preprocess(common, pf);
    else if (*gmm) cmd_segment_gmm(common, gf);
    else if (*ar) cmd_segment_ar(common, af);
    else if (*train) cmd_train_nb(common, train_in);
    else if (*classify) cmd_classify(common, classify_in, model_path);
    else if (*eval) cmd_evaluate(common, eval_in, ef);
    else if (*synth) cmd_synth(common, scenario);
    else if (*spec) cmd_spectrum(common, sf);
    else if (*run) cmd_run(common, rf);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.is_validation() ? kExitValidation : kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return 0;
}
