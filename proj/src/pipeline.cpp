#include "qcseg/pipeline.hpp"

#include <set>

#include "qcseg/error.hpp"
#include "qcseg/rng.hpp"
#include "qcseg/signal.hpp"

namespace qcseg {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(ModelChoice m) { return m == ModelChoice::Gmm ? "gmm" : "switching-ar"; }

ModelChoice model_choice_from_string(std::string_view name) {
  if (name == "gmm") return ModelChoice::Gmm;
  if (name == "switching-ar") return ModelChoice::SwitchingAr;
  throw Error(ErrorCode::InvalidArgument, "unknown model '" + std::string(name) + "' (gmm or switching-ar)");
}

void PipelineConfig::validate() const {
  auto bad = [](const std::string& what) { throw Error(ErrorCode::InvalidArgument, what); };
  if (!(target_rate > 0.0)) bad("target_rate must be > 0");
  if (!(cutoff_hz > 0.0)) bad("cutoff_hz must be > 0");
  if (kind == TestKind::Walking && cutoff_hz >= target_rate / 2.0) bad("cutoff_hz must be below the Nyquist frequency");
  if (decimation == 0) bad("decimation must be >= 1");
  if (energy_window == 0) bad("energy_window must be >= 1");
  if (!(log_floor > 0.0)) bad("log_floor must be > 0");
  if (!(median_window_seconds > 0.0)) bad("median_window_seconds must be > 0");
  if (!(nb_smoothing > 0.0)) bad("nb_smoothing must be > 0");
  if (count_scale < 1) bad("count_scale must be >= 1");
  if (cv.folds < 2) bad("folds must be >= 2");
  if (gmm.components != 2) bad("the mixture path needs exactly 2 components");
  trend.validate();
  hdp.validate();
}

namespace {

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

template <typename T>
void take(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Format, std::string("config field '") + key + "': " + e.what());
  }
}

void reject_unknown(const json& j, std::initializer_list<const char*> known, const std::string& where) {
  if (!j.is_object()) throw Error(ErrorCode::Format, where + " must be an object");
  std::set<std::string> names(known.begin(), known.end());
  for (const auto& [k, v] : j.items()) {
    if (!names.count(k)) throw Error(ErrorCode::Format, "unknown config key '" + where + k + "'");
  }
}

}  // namespace

json to_json(const PipelineConfig& c) {
  return {
      {"kind", std::string(to_string(c.kind))},
      {"target_rate", c.target_rate},
      {"cutoff_hz", c.cutoff_hz},
      {"decimation", c.decimation},
      {"energy_window", c.energy_window},
      {"squared_energy", c.squared_energy},
      {"log_floor", c.log_floor},
      {"trend",
       {{"lambda", opt_json(c.trend.lambda)},
        {"max_iterations", c.trend.max_iterations},
        {"tolerance", c.trend.tolerance},
        {"fidelity", c.trend.fidelity == FidelityMode::Squared ? "squared" : "absolute"}}},
      {"model", std::string(to_string(c.model))},
      {"gmm",
       {{"components", c.gmm.components},
        {"tolerance", c.gmm.tolerance},
        {"max_iterations", c.gmm.max_iterations},
        {"restarts", c.gmm.restarts}}},
      {"median_window_seconds", c.median_window_seconds},
      {"hdp",
       {{"order", c.hdp.order},
        {"truncation", c.hdp.truncation},
        {"alpha", c.hdp.alpha},
        {"gamma", c.hdp.gamma},
        {"kappa", c.hdp.kappa},
        {"sweeps", c.hdp.sweeps},
        {"burn_in", c.hdp.burn_in}}},
      {"nb_smoothing", c.nb_smoothing},
      {"count_scale", c.count_scale},
      {"use_posteriors", c.use_posteriors},
      {"cv",
       {{"folds", c.cv.folds},
        {"strategy", std::string(to_string(c.cv.strategy))},
        {"metric", std::string(to_string(c.cv.definition))}}},
      {"seed", c.seed},
      {"input", c.input.generic_string()},
      {"truth", c.truth.generic_string()},
      {"out_dir", c.out_dir.generic_string()},
      {"keep_intermediates", c.keep_intermediates},
  };
}

std::string pipeline_config_hash(const PipelineConfig& c) {
  json j = to_json(c);
  j.erase("out_dir");
  return config_hash(j);
}

PipelineConfig pipeline_config_from_json(const json& j, PipelineConfig c) {
  reject_unknown(j,
                 {"kind", "target_rate", "cutoff_hz", "decimation", "energy_window", "squared_energy", "log_floor",
                  "trend", "model", "gmm", "median_window_seconds", "hdp", "nb_smoothing", "count_scale",
                  "use_posteriors", "cv", "seed", "input", "truth", "out_dir", "keep_intermediates"},
                 "");
  std::string s;
  if (j.contains("kind")) {
    take(j, "kind", s);
    c.kind = test_kind_from_string(s);
  }
  take(j, "target_rate", c.target_rate);
  take(j, "cutoff_hz", c.cutoff_hz);
  take(j, "decimation", c.decimation);
  take(j, "energy_window", c.energy_window);
  take(j, "squared_energy", c.squared_energy);
  take(j, "log_floor", c.log_floor);
  if (j.contains("trend")) {
    const json& t = j.at("trend");
    reject_unknown(t, {"lambda", "max_iterations", "tolerance", "fidelity"}, "trend.");
    if (t.contains("lambda")) {
      if (t.at("lambda").is_null()) {
        c.trend.lambda.reset();
      } else {
        double v = 0.0;
        take(t, "lambda", v);
        c.trend.lambda = v;
      }
    }
    take(t, "max_iterations", c.trend.max_iterations);
    take(t, "tolerance", c.trend.tolerance);
    if (t.contains("fidelity")) {
      take(t, "fidelity", s);
      if (s == "squared") {
        c.trend.fidelity = FidelityMode::Squared;
      } else if (s == "absolute") {
        c.trend.fidelity = FidelityMode::Absolute;
      } else {
        throw Error(ErrorCode::InvalidArgument, "trend.fidelity must be squared or absolute");
      }
    }
  }
  if (j.contains("model")) {
    take(j, "model", s);
    c.model = model_choice_from_string(s);
  }
  if (j.contains("gmm")) {
    const json& g = j.at("gmm");
    reject_unknown(g, {"components", "tolerance", "max_iterations", "restarts"}, "gmm.");
    take(g, "components", c.gmm.components);
    take(g, "tolerance", c.gmm.tolerance);
    take(g, "max_iterations", c.gmm.max_iterations);
    take(g, "restarts", c.gmm.restarts);
  }
  take(j, "median_window_seconds", c.median_window_seconds);
  if (j.contains("hdp")) {
    const json& h = j.at("hdp");
    reject_unknown(h, {"order", "truncation", "alpha", "gamma", "kappa", "sweeps", "burn_in"}, "hdp.");
    take(h, "order", c.hdp.order);
    take(h, "truncation", c.hdp.truncation);
    take(h, "alpha", c.hdp.alpha);
    take(h, "gamma", c.hdp.gamma);
    take(h, "kappa", c.hdp.kappa);
    take(h, "sweeps", c.hdp.sweeps);
    take(h, "burn_in", c.hdp.burn_in);
  }
  take(j, "nb_smoothing", c.nb_smoothing);
  take(j, "count_scale", c.count_scale);
  take(j, "use_posteriors", c.use_posteriors);
  if (j.contains("cv")) {
    const json& v = j.at("cv");
    reject_unknown(v, {"folds", "strategy", "metric"}, "cv.");
    take(v, "folds", c.cv.folds);
    if (v.contains("strategy")) {
      take(v, "strategy", s);
      c.cv.strategy = fold_strategy_from_string(s);
    }
    if (v.contains("metric")) {
      take(v, "metric", s);
      c.cv.definition = metric_definition_from_string(s);
    }
  }
  take(j, "seed", c.seed);
  if (j.contains("input")) {
    take(j, "input", s);
    c.input = s;
  }
  if (j.contains("truth")) {
    take(j, "truth", s);
    c.truth = s;
  }
  if (j.contains("out_dir")) {
    take(j, "out_dir", s);
    c.out_dir = s;
  }
  take(j, "keep_intermediates", c.keep_intermediates);
  return c;
}

std::uint64_t stage_seed(const PipelineConfig& c, std::string_view stage) { return derive_seed(c.seed, stage); }

RawRecording read_recording(TestKind kind, const fs::path& path) {
  RawRecording raw;
  if (kind == TestKind::Voice) {
    TimedSeries s = read_scalar(path, ScalarUnit::Raw);
    raw.audio_start = s.times.front();
    raw.audio = std::move(s.series);
  } else {
    raw.accel = read_triaxial(path);
  }
  return raw;
}

namespace {

// Runs one stage, prefixing any library error with the stage name.
template <typename F>
auto stage(const char* name, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    std::string msg = e.what();
    const std::string prefix = std::string(to_string(e.code())) + ": ";
    if (msg.rfind(prefix, 0) == 0) msg.erase(0, prefix.size());
    throw Error(e.code(), std::string(name) + ": " + msg);
  }
}

std::vector<double> grid(double start, double step, std::size_t n, double offset = 0.0) {
  std::vector<double> t(n);
  for (std::size_t i = 0; i < n; ++i) t[i] = start + (static_cast<double>(i) + offset) * step;
  return t;
}

}  // namespace

PreprocessResult preprocess_recipe(const PipelineConfig& config, const RawRecording& raw) {
  config.validate();
  PreprocessResult out;
  if (config.kind == TestKind::Voice) {
    if (raw.audio.values.empty()) throw Error(ErrorCode::EmptyInput, "windowed_energy: no audio samples");
    out.feature = stage("windowed_energy",
                        [&] { return windowed_energy(raw.audio, config.energy_window, config.squared_energy); });
    out.times = grid(raw.audio_start, static_cast<double>(config.energy_window) / raw.audio.rate,
                     out.feature.size(), 0.5);
    return out;
  }

  if (raw.accel.samples.empty()) throw Error(ErrorCode::EmptyInput, "interpolate_uniform: no acceleration samples");
  const double t0 = raw.accel.timestamps.front();
  TriaxialSeries uniform =
      stage("interpolate_uniform", [&] { return interpolate_uniform(raw.accel, config.target_rate); });
  GravityDecomposition dec = stage("remove_gravity", [&] { return remove_gravity(uniform, config.trend); });
  out.trend_converged = dec.converged;

  if (config.kind == TestKind::Balance) {
    out.feature = stage("magnitude", [&] { return magnitude(dec.dynamic); });
    out.times = grid(t0, 1.0 / config.target_rate, out.feature.size());
  } else {
    ScalarSeries logmag = stage("log_magnitude", [&] { return log_magnitude(dec.dynamic, config.log_floor); });
    ScalarSeries filtered = stage("lowpass_filter", [&] { return lowpass_filter(logmag, config.cutoff_hz); });
    out.feature = stage("downsample", [&] { return downsample(filtered, config.decimation); });
    out.times = grid(t0, static_cast<double>(config.decimation) / config.target_rate, out.feature.size());
    if (config.keep_intermediates) out.unfiltered = std::move(logmag);
  }
  if (config.keep_intermediates) {
    out.uniform_times = grid(t0, 1.0 / config.target_rate, uniform.size());
    out.uniform = std::move(uniform);
    out.decomposition = std::move(dec);
  }
  return out;
}

void write_intermediates(const fs::path& dir, const PreprocessResult& pre, const Provenance& p) {
  if (!pre.uniform.samples.empty()) {
    write_triaxial(dir / "uniform.csv", {pre.uniform_times, pre.uniform.samples}, p);
  }
  if (pre.decomposition) {
    write_decomposition(dir / "decomposition.csv", pre.uniform_times, pre.decomposition->trend.samples,
                        pre.decomposition->dynamic.samples, p);
  }
  if (!pre.unfiltered.values.empty()) write_scalar(dir / "unfiltered.csv", pre.uniform_times, pre.unfiltered, p);
}

PipelineResult run_on_feature(const PipelineConfig& config, PreprocessResult pre,
                              const std::optional<AdherenceLabels>& truth) {
  config.validate();
  if (truth && truth->size() != pre.feature.size()) {
    throw Error(ErrorCode::InvalidArgument, "truth labels do not match the feature length");
  }
  PipelineResult r;
  CvOptions cv = config.cv;
  cv.seed = stage_seed(config, "cv");

  if (config.model == ModelChoice::Gmm) {
    GmmOptions g = config.gmm;
    g.seed = stage_seed(config, "gmm");
    const int window = default_median_window(pre.feature.rate, config.median_window_seconds);
    r.gmm = stage("segment_gmm", [&] { return segment_gmm(pre.feature, config.kind, window, g); });
    r.states = r.gmm->smoothed;
    r.state_count = 2;
    r.labels = r.gmm->labels;
    if (truth) {
      // Nothing is trained on the labels, so the whole recording is scored at once.
      MetricsReport rep = summarize({tp_tn_ba(r.labels, *truth, cv.definition)});
      rep.strategy = cv.strategy;
      rep.definition = cv.definition;
      rep.seed = cv.seed;
      r.report = std::move(rep);
    }
  } else {
    HdpArConfig h = config.hdp;
    h.seed = stage_seed(config, "hdp-ar");
    r.hdp = stage("fit_hdp_ar", [&] { return fit_hdp_ar(pre.feature, h); });
    r.states = r.hdp->states;
    r.state_count = h.truncation;
    if (truth) {
      const auto inputs = counts_from_states(r.states, r.state_count, config.count_scale, config.use_posteriors);
      r.report = stage("cross_validation", [&] {
        return kfold_cv(*truth, naive_bayes_pipeline(inputs, *truth, config.nb_smoothing, &r.confidence), cv,
                        &r.labels);
      });
      r.nb = stage("nb_train", [&] { return nb_train(inputs, *truth, config.nb_smoothing); });
    }
  }
  r.pre = std::move(pre);
  return r;
}

PipelineResult run_pipeline(const PipelineConfig& config, const RawRecording& raw,
                            const std::optional<AdherenceLabels>& truth) {
  return run_on_feature(config, preprocess_recipe(config, raw), truth);
}

PipelineResult run_pipeline_files(const PipelineConfig& config) {
  config.validate();
  if (config.input.empty()) throw Error(ErrorCode::InvalidArgument, "no input file given");
  const Provenance prov{pipeline_config_hash(config), config.seed};
  const RawRecording raw = read_recording(config.kind, config.input);
  PreprocessResult pre = preprocess_recipe(config, raw);
  std::optional<AdherenceLabels> truth;
  if (!config.truth.empty()) truth = read_truth_at(config.truth, pre.times);

  const fs::path& dir = config.out_dir;
  write_scalar(dir / "feature.csv", pre.times, pre.feature, prov);
  if (config.keep_intermediates) write_intermediates(dir, pre, prov);

  PipelineResult r = run_on_feature(config, std::move(pre), truth);
  const auto& times = r.pre.times;
  write_states(dir / "states.csv", times, r.states, prov);
  if (r.gmm) write_json(dir / "gmm.json", to_json(r.gmm->fit.params), prov);
  if (r.hdp) {
    write_posteriors(dir / "posteriors.csv", times, r.states, prov);
    write_json(dir / "model.json", to_json(r.hdp->model), prov);
  }
  if (r.nb) write_json(dir / "nb.json", to_json(*r.nb), prov);
  if (!r.labels.empty()) write_labels(dir / "labels.csv", times, r.labels, r.confidence, prov);
  if (r.report) {
    json doc = to_json(*r.report);
    doc["config"] = to_json(config);
    doc["config"].erase("out_dir");  // outputs do not depend on where they are written
    write_json(dir / "report.json", std::move(doc), prov);
  }
  return r;
}

}  // namespace qcseg
