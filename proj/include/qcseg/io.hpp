#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "qcseg/context.hpp"
#include "qcseg/evaluation.hpp"
#include "qcseg/gmm.hpp"
#include "qcseg/hdp_ar.hpp"
#include "qcseg/synth.hpp"
#include "qcseg/types.hpp"

namespace qcseg {

/// Written as the first line of every output file: "# qcseg config=<hash> seed=<seed>".
struct Provenance {
  std::string config_hash = "0000000000000000";
  std::uint64_t seed = 0;

  std::string line() const;
};

/// Hex FNV-1a of a JSON document's canonical dump (keys sorted).
std::string config_hash(const nlohmann::json& config);

/// Comma-separated table with a header row. Lines starting with '#' and
/// blank lines are skipped on read.
struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  bool has(const std::string& column) const;
  std::size_t index(const std::string& column) const;  // throws Format
  std::vector<double> numeric(const std::string& column) const;
  std::vector<std::string> text(const std::string& column) const;
};

CsvTable read_csv(const std::filesystem::path& path);

/// Numeric columns, one vector per column, all the same length. Values are
/// written with 17 significant digits so they read back bit-identically.
void write_csv(const std::filesystem::path& path, const std::vector<std::string>& columns,
               const std::vector<std::vector<double>>& data, const Provenance& provenance);

std::string format_double(double v);

// Typed readers and writers for the file formats of each stage.

TimestampedTriaxial read_triaxial(const std::filesystem::path& path);  // t,x,y,z
void write_triaxial(const std::filesystem::path& path, const TimestampedTriaxial& data, const Provenance& p);

struct TimedSeries {
  std::vector<double> times;
  ScalarSeries series;
};

/// t,v. The rate is recovered from the mean timestamp step.
TimedSeries read_scalar(const std::filesystem::path& path, ScalarUnit unit = ScalarUnit::Raw);
void write_scalar(const std::filesystem::path& path, const std::vector<double>& times, const ScalarSeries& series,
                  const Provenance& p);

struct TimedLabels {
  std::vector<double> times;
  AdherenceLabels labels;
  std::vector<double> confidence;  // empty when the file has none
};

TimedLabels read_labels(const std::filesystem::path& path);  // t,u[,confidence]
void write_labels(const std::filesystem::path& path, const std::vector<double>& times, const AdherenceLabels& labels,
                  const std::vector<double>& confidence, const Provenance& p);

struct TimedStates {
  std::vector<double> times;
  StateSequence states;  // 0-based in memory
};

/// t,z with 1-based z; an optional companion posterior file t,p1..pL.
TimedStates read_states(const std::filesystem::path& path);
void write_states(const std::filesystem::path& path, const std::vector<double>& times, const StateSequence& z,
                  const Provenance& p);
void read_posteriors(const std::filesystem::path& path, StateSequence& z);
void write_posteriors(const std::filesystem::path& path, const std::vector<double>& times, const StateSequence& z,
                      const Provenance& p);

void write_spectrum(const std::filesystem::path& path, const SpectrumEstimate& s, const Provenance& p);  // f,power

/// t,gx,gy,gz,dx,dy,dz
void write_decomposition(const std::filesystem::path& path, const std::vector<double>& times,
                         const std::vector<Vec3>& gravity, const std::vector<Vec3>& dynamic, const Provenance& p);

/// start,end,state,u,behaviour (state 1-based, u empty when unknown)
struct TruthSchedule {
  std::vector<RegimeSegment> schedule;
  std::vector<std::string> behaviours;  // per state id
  std::vector<Adherence> adherence;     // per state id
};

void write_schedule(const std::filesystem::path& path, const TruthSchedule& truth, const Provenance& p);
TruthSchedule read_schedule(const std::filesystem::path& path);

/// Adherence labels on arbitrary times from either a t,u label file (matched
/// by nearest preceding timestamp) or a schedule file.
AdherenceLabels read_truth_at(const std::filesystem::path& path, const std::vector<double>& times);

// Versioned JSON documents: {"format": "qcseg", "version": 1, "type": ..., ...}.

constexpr int kFormatVersion = 1;

nlohmann::json to_json(const SwitchingArModel& m);
SwitchingArModel switching_ar_from_json(const nlohmann::json& j);
nlohmann::json to_json(const NaiveBayesModel& m);
NaiveBayesModel naive_bayes_from_json(const nlohmann::json& j);
nlohmann::json to_json(const GmmParams& m);
GmmParams gmm_from_json(const nlohmann::json& j);
nlohmann::json to_json(const MetricsReport& r);
nlohmann::json to_json(const FoldMetrics& m);

/// Adds the provenance fields and writes with two-space indentation.
void write_json(const std::filesystem::path& path, nlohmann::json doc, const Provenance& p);
nlohmann::json read_json(const std::filesystem::path& path);

}  // namespace qcseg
