#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qcseg/types.hpp"

namespace qcseg {

/// State index -> behaviour name.
using BehaviourMap = std::map<int, std::string>;

/// Each occupied state takes the most frequent behaviour label among its time
/// points; ties resolve to the lexicographically smallest label. Empty labels
/// count as unlabelled.
BehaviourMap mode_behaviour_map(const StateSequence& z, const std::vector<std::string>& behaviours);

std::vector<std::string> apply_behaviour_map(const StateSequence& z, const BehaviourMap& map);

/// Integer frequencies over state indices.
using CountVector = std::vector<int>;

/// round(scale * p_k); if everything rounds to zero the whole scale goes to
/// the argmax.
CountVector rescale_to_counts(const std::vector<double>& probabilities, int scale = 100);

/// All of `scale` on state `state` (modal-indicator input).
CountVector one_hot_counts(int state, int states, int scale = 100);

/// Inputs for the classifier from a state sequence: rescaled posterior rows
/// when present and `use_posteriors` is set, otherwise one-hot modal states.
std::vector<CountVector> counts_from_states(const StateSequence& z, int states, int scale = 100,
                                            bool use_posteriors = true);

/// Multinomial naive Bayes over state-count attributes for the two classes
/// adherence (index 0) and violation (index 1).
///
/// Attributes are the state indices with non-zero training mass. Any input
/// mass on another state falls on an unseen-state pseudo-attribute whose
/// class-conditional probability is 0 under adherence and 1 under violation,
/// so such inputs are always classified as violations.
struct NaiveBayesModel {
  std::vector<int> attribute_states;                 // seen state ids, ascending
  std::array<std::vector<double>, 2> probabilities;  // per class, over attributes
  std::array<double, 2> priors{0.5, 0.5};
  double smoothing = 1.0;

  /// Position of a state among the attributes, or nullopt for unseen states.
  std::optional<std::size_t> attribute_of(int state) const;
};

NaiveBayesModel nb_train(const std::vector<CountVector>& inputs, const AdherenceLabels& labels,
                         double smoothing = 1.0,
                         std::optional<std::array<double, 2>> priors_override = std::nullopt);

struct NbPrediction {
  Adherence label = Adherence::Adherence;
  std::array<double, 2> log_scores{};    // log prior + sum p_k log pi_k
  std::array<double, 2> probabilities{}; // normalized scores
  double confidence() const { return probabilities[label == Adherence::Adherence ? 0 : 1]; }
};

/// Argmax of the class log-scores; exact ties go to adherence.
NbPrediction nb_predict(const NaiveBayesModel& model, const CountVector& input);

struct ProjectedPoint {
  double x = 0.0;
  double y = 0.0;
  std::optional<Adherence> label;  // empty for decision-boundary points
};

/// Two-dimensional linear-discriminant view of log(1 + counts): the first
/// axis is the Fisher direction, the second the leading principal direction
/// orthogonal to it. Boundary points are inputs on which the classifier's
/// two log-scores are equal, projected with the same coefficients.
std::vector<ProjectedPoint> lda_projection(const std::vector<CountVector>& inputs,
                                           const AdherenceLabels& labels, const NaiveBayesModel& model);

}  // namespace qcseg
