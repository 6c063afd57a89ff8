#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "qcseg/context.hpp"
#include "qcseg/types.hpp"

namespace qcseg {

/// How TP and TN are normalized.
///
/// Predictive: TP = |pred = pos and truth = pos| / |pred = pos|, and TN the
/// same for the negative class. This is the printed definition and is the
/// default.
///
/// Recall: the conventional sensitivity/specificity, normalized by the true
/// class sizes.
enum class MetricDefinition { Predictive, Recall };

std::string_view to_string(MetricDefinition d);
MetricDefinition metric_definition_from_string(std::string_view name);

/// One evaluation. A metric is empty when its denominator is zero; BA is
/// empty when either rate is. Undefined values are never reported as 0.
struct FoldMetrics {
  std::optional<double> tp;
  std::optional<double> tn;
  std::optional<double> ba;
  std::size_t size = 0;

  bool defined() const { return ba.has_value(); }
  /// Throws EmptyDenominator when BA is undefined.
  double require_ba() const;
};

/// TP, TN and BA = (TP + TN) / 2 for the binary labelling in which `positive`
/// is the positive class and every other value is negative.
template <typename Label>
FoldMetrics binary_metrics(const std::vector<Label>& predicted, const std::vector<Label>& truth,
                           const Label& positive, MetricDefinition def = MetricDefinition::Predictive);

FoldMetrics tp_tn_ba(const AdherenceLabels& predicted, const AdherenceLabels& truth,
                     MetricDefinition def = MetricDefinition::Predictive);

/// Per-behaviour metrics for multi-class labels: each behaviour in turn is the
/// positive class.
std::vector<std::pair<std::string, FoldMetrics>> per_behaviour_metrics(
    const std::vector<std::string>& predicted, const std::vector<std::string>& truth,
    MetricDefinition def = MetricDefinition::Predictive);

enum class FoldStrategy { ContiguousBlocks, Shuffled };

std::string_view to_string(FoldStrategy s);
FoldStrategy fold_strategy_from_string(std::string_view name);

/// Test-index sets of a k-fold split of n items. Contiguous blocks differ in
/// size by at most one; shuffled folds permute indices with a seeded RNG and
/// then cut the same blocks.
std::vector<std::vector<std::size_t>> make_folds(std::size_t n, int k, FoldStrategy strategy,
                                                 std::uint64_t seed = 0);

struct MetricsReport {
  std::vector<FoldMetrics> folds;
  std::optional<double> tp_mean, tn_mean, ba_mean;
  std::optional<double> tp_std, tn_std, ba_std;  // population std over defined folds
  int undefined_folds = 0;                       // folds with undefined BA
  int k = 0;
  FoldStrategy strategy = FoldStrategy::ContiguousBlocks;
  MetricDefinition definition = MetricDefinition::Predictive;
  std::uint64_t seed = 0;
};

/// Aggregates fold results into means and standard deviations.
MetricsReport summarize(std::vector<FoldMetrics> folds);

/// A train-then-predict pipeline: given training and test index sets, returns
/// one prediction per test index (in order).
using CvPipeline = std::function<AdherenceLabels(const std::vector<std::size_t>& train,
                                                 const std::vector<std::size_t>& test)>;

struct CvOptions {
  int folds = 10;
  FoldStrategy strategy = FoldStrategy::ContiguousBlocks;
  MetricDefinition definition = MetricDefinition::Predictive;
  std::uint64_t seed = 0;
};

/// Runs the pipeline on every fold. Throws FoldTooSmall when a fold is empty
/// or a training split lacks one of the two classes. When `out_of_fold` is
/// given it receives each point's prediction from the fold that held it out.
MetricsReport kfold_cv(const AdherenceLabels& labels, const CvPipeline& pipeline, const CvOptions& options,
                       AdherenceLabels* out_of_fold = nullptr);

/// Naive Bayes on precomputed classifier inputs. `inputs` and `labels` are
/// captured by reference and must outlive the returned pipeline. When
/// `confidence` is given, the winning class probability of every predicted
/// point is written at that point's index (the vector is resized as needed).
CvPipeline naive_bayes_pipeline(const std::vector<CountVector>& inputs, const AdherenceLabels& labels,
                                double smoothing = 1.0, std::vector<double>* confidence = nullptr);

/// Permutes the per-time classifier inputs with a seeded shuffle, keeping the
/// labels in place, then runs the same naive Bayes CV.
MetricsReport shuffled_baseline(const std::vector<CountVector>& inputs, const AdherenceLabels& labels,
                                const CvOptions& options, std::uint64_t shuffle_seed, double smoothing = 1.0);

/// Same, starting from a state sequence: classifier inputs come from
/// `counts_from_states` and the shuffle permutes them per time point, which
/// carries the indicators and their posterior rows together.
MetricsReport shuffled_baseline(const StateSequence& z, int states, const AdherenceLabels& labels,
                                const CvOptions& options, std::uint64_t shuffle_seed, double smoothing = 1.0,
                                int scale = 100);

double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b);

}  // namespace qcseg
