#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "qcseg/context.hpp"
#include "qcseg/evaluation.hpp"
#include "qcseg/gmm.hpp"
#include "qcseg/hdp_ar.hpp"
#include "qcseg/io.hpp"
#include "qcseg/trend_filter.hpp"
#include "qcseg/types.hpp"

namespace qcseg {

enum class ModelChoice { Gmm, SwitchingAr };

std::string_view to_string(ModelChoice m);
ModelChoice model_choice_from_string(std::string_view name);

struct PipelineConfig {
  TestKind kind = TestKind::Walking;

  // Preprocessing
  double target_rate = 120.0;      // Hz, uniform interpolation grid
  double cutoff_hz = 15.0;         // walking low-pass
  std::size_t decimation = 4;      // walking only
  std::size_t energy_window = 441; // voice: 10 ms at 44.1 kHz
  bool squared_energy = false;
  double log_floor = 1e-6;
  TrendFilterConfig trend;

  // Segmentation
  ModelChoice model = ModelChoice::SwitchingAr;
  GmmOptions gmm;
  double median_window_seconds = 2.0;
  HdpArConfig hdp;

  // Classification and evaluation
  double nb_smoothing = 1.0;
  int count_scale = 100;
  bool use_posteriors = true;
  CvOptions cv;

  // Root seed; every stage draws from a named sub-stream of it.
  std::uint64_t seed = 0;

  std::filesystem::path input;
  std::filesystem::path truth;  // optional labels or schedule file
  std::filesystem::path out_dir = ".";
  bool keep_intermediates = false;

  /// Throws InvalidArgument for parameters outside the stage preconditions.
  void validate() const;
};

/// Field-for-field dump. Paths are included so that two runs on different
/// inputs never share a config hash.
nlohmann::json to_json(const PipelineConfig& c);

/// Hash of `to_json` without out_dir, so the same run written to two
/// directories carries the same fingerprint.
std::string pipeline_config_hash(const PipelineConfig& c);

/// Overwrites the fields present in `j` on top of `base`. Unknown keys are a
/// Format error so typos do not silently fall back to defaults.
PipelineConfig pipeline_config_from_json(const nlohmann::json& j, PipelineConfig base = {});

/// Sub-stream seeds for each stage, derived from the root seed.
std::uint64_t stage_seed(const PipelineConfig& c, std::string_view stage);

/// Raw input for one test: triaxial acceleration (walking, balance) or audio
/// samples with the time of the first sample (voice).
struct RawRecording {
  TimestampedTriaxial accel;
  ScalarSeries audio;
  double audio_start = 0.0;
};

RawRecording read_recording(TestKind kind, const std::filesystem::path& path);

struct PreprocessResult {
  ScalarSeries feature;
  std::vector<double> times;  // one per feature sample

  // Filled only when intermediates are requested.
  std::vector<double> uniform_times;
  TriaxialSeries uniform;
  std::optional<GravityDecomposition> decomposition;
  ScalarSeries unfiltered;  // walking: log-magnitude before the low-pass
  bool trend_converged = true;
};

/// walking: interpolate, remove gravity, log-magnitude, low-pass, downsample.
/// balance: interpolate, remove gravity, magnitude.
/// voice: windowed energy, timestamped at each frame centre.
/// Stage errors are rethrown with the stage name prepended.
PreprocessResult preprocess_recipe(const PipelineConfig& config, const RawRecording& raw);

/// Writes uniform.csv, decomposition.csv and (walking) unfiltered.csv.
void write_intermediates(const std::filesystem::path& dir, const PreprocessResult& pre, const Provenance& p);

struct PipelineResult {
  PreprocessResult pre;
  StateSequence states;
  int state_count = 0;  // columns of the state space (2 for the mixture, L for the sampler)
  AdherenceLabels labels;
  std::vector<double> confidence;  // empty on the mixture path
  std::optional<MetricsReport> report;
  std::optional<GmmSegmentation> gmm;
  std::optional<HdpArFit> hdp;
  std::optional<NaiveBayesModel> nb;  // trained on every labelled point
};

/// Segments, classifies and (with truth) evaluates an already preprocessed
/// feature.
///
/// Mixture path: labels come from the mean-orientation rule; with truth the
/// report holds a single entry scoring the whole recording.
///
/// Switching-AR path: needs truth, because the classifier is supervised.
/// Labels are the out-of-fold predictions of the cross-validation and the
/// report is its fold metrics. Without truth only states are produced.
PipelineResult run_on_feature(const PipelineConfig& config, PreprocessResult pre,
                              const std::optional<AdherenceLabels>& truth);

/// Preprocess plus `run_on_feature`.
PipelineResult run_pipeline(const PipelineConfig& config, const RawRecording& raw,
                            const std::optional<AdherenceLabels>& truth);

/// Reads config.input (and config.truth when set), runs the pipeline, writes
/// feature.csv, states.csv, labels.csv, model files and report.json to
/// config.out_dir. Returns the result for callers that want it.
PipelineResult run_pipeline_files(const PipelineConfig& config);

}  // namespace qcseg
