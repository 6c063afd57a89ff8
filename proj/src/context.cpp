#include "qcseg/context.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "qcseg/error.hpp"

namespace qcseg {

BehaviourMap mode_behaviour_map(const StateSequence& z, const std::vector<std::string>& behaviours) {
  if (z.size() != behaviours.size()) {
    throw Error(ErrorCode::InvalidArgument, "indicators and behaviour labels differ in length");
  }
  std::map<int, std::map<std::string, std::size_t>> tallies;
  for (std::size_t t = 0; t < z.size(); ++t) {
    auto& tally = tallies[z.indicators[t]];
    if (!behaviours[t].empty()) ++tally[behaviours[t]];
  }
  BehaviourMap out;
  for (const auto& [state, tally] : tallies) {
    if (tally.empty()) {
      throw Error(ErrorCode::UnlabelledState, "state " + std::to_string(state + 1) + " has no labelled points");
    }
    // std::map iterates labels in lexicographic order, so strict > keeps the
    // smallest label among equal counts.
    const std::string* best = nullptr;
    std::size_t count = 0;
    for (const auto& [label, c] : tally) {
      if (c > count) {
        best = &label;
        count = c;
      }
    }
    out[state] = *best;
  }
  return out;
}

std::vector<std::string> apply_behaviour_map(const StateSequence& z, const BehaviourMap& map) {
  std::vector<std::string> out;
  out.reserve(z.size());
  for (int s : z.indicators) {
    const auto it = map.find(s);
    out.push_back(it == map.end() ? std::string{} : it->second);
  }
  return out;
}

CountVector rescale_to_counts(const std::vector<double>& probabilities, int scale) {
  if (scale < 1) throw Error(ErrorCode::InvalidArgument, "scale must be >= 1");
  if (probabilities.empty()) throw Error(ErrorCode::EmptyInput, "empty probability vector");
  CountVector out(probabilities.size());
  bool any = false;
  for (std::size_t k = 0; k < probabilities.size(); ++k) {
    out[k] = static_cast<int>(std::lround(scale * probabilities[k]));
    any = any || out[k] != 0;
  }
  if (!any) {
    const auto arg = std::max_element(probabilities.begin(), probabilities.end()) - probabilities.begin();
    out[static_cast<std::size_t>(arg)] = scale;
  }
  return out;
}

CountVector one_hot_counts(int state, int states, int scale) {
  if (state < 0 || state >= states) throw Error(ErrorCode::InvalidArgument, "state index out of range");
  CountVector out(static_cast<std::size_t>(states), 0);
  out[static_cast<std::size_t>(state)] = scale;
  return out;
}

std::vector<CountVector> counts_from_states(const StateSequence& z, int states, int scale,
                                            bool use_posteriors) {
  std::vector<CountVector> out;
  out.reserve(z.size());
  const bool posteriors = use_posteriors && z.posteriors.size() == z.size();
  for (std::size_t t = 0; t < z.size(); ++t) {
    out.push_back(posteriors ? rescale_to_counts(z.posteriors[t], scale)
                             : one_hot_counts(z.indicators[t], states, scale));
  }
  return out;
}

std::optional<std::size_t> NaiveBayesModel::attribute_of(int state) const {
  const auto it = std::lower_bound(attribute_states.begin(), attribute_states.end(), state);
  if (it == attribute_states.end() || *it != state) return std::nullopt;
  return static_cast<std::size_t>(it - attribute_states.begin());
}

NaiveBayesModel nb_train(const std::vector<CountVector>& inputs, const AdherenceLabels& labels,
                         double smoothing, std::optional<std::array<double, 2>> priors_override) {
  if (inputs.size() != labels.size()) {
    throw Error(ErrorCode::InvalidArgument, "inputs and labels differ in length");
  }
  if (!(smoothing >= 0.0)) throw Error(ErrorCode::InvalidArgument, "smoothing must be >= 0");
  std::array<std::size_t, 2> class_n{0, 0};
  for (auto u : labels) ++class_n[u == Adherence::Adherence ? 0 : 1];
  if (class_n[0] == 0 || class_n[1] == 0) {
    throw Error(ErrorCode::SingleClassTraining, "training labels contain a single class");
  }

  std::size_t width = 0;
  for (const auto& p : inputs) width = std::max(width, p.size());
  std::array<std::vector<double>, 2> totals{std::vector<double>(width, 0.0), std::vector<double>(width, 0.0)};
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    auto& row = totals[labels[t] == Adherence::Adherence ? 0 : 1];
    for (std::size_t k = 0; k < inputs[t].size(); ++k) {
      if (inputs[t][k] < 0) throw Error(ErrorCode::InvalidArgument, "negative count");
      row[k] += inputs[t][k];
    }
  }

  NaiveBayesModel model;
  model.smoothing = smoothing;
  for (std::size_t k = 0; k < width; ++k) {
    if (totals[0][k] + totals[1][k] > 0.0) model.attribute_states.push_back(static_cast<int>(k));
  }
  const double attrs = static_cast<double>(model.attribute_states.size());
  for (int c = 0; c < 2; ++c) {
    double class_total = 0.0;
    for (int s : model.attribute_states) class_total += totals[c][static_cast<std::size_t>(s)];
    const double denom = attrs * smoothing + class_total;
    for (int s : model.attribute_states) {
      const double num = smoothing + totals[c][static_cast<std::size_t>(s)];
      model.probabilities[c].push_back(denom > 0.0 ? num / denom : 1.0 / attrs);
    }
  }
  if (priors_override) {
    const double sum = (*priors_override)[0] + (*priors_override)[1];
    if (!((*priors_override)[0] > 0.0) || !((*priors_override)[1] > 0.0)) {
      throw Error(ErrorCode::InvalidArgument, "class priors must be > 0");
    }
    model.priors = {(*priors_override)[0] / sum, (*priors_override)[1] / sum};
  } else {
    const double n = static_cast<double>(labels.size());
    model.priors = {static_cast<double>(class_n[0]) / n, static_cast<double>(class_n[1]) / n};
  }
  return model;
}

NbPrediction nb_predict(const NaiveBayesModel& model, const CountVector& input) {
  NbPrediction pred;
  bool unseen = false;
  for (int c = 0; c < 2; ++c) pred.log_scores[c] = std::log(model.priors[c]);
  for (std::size_t k = 0; k < input.size(); ++k) {
    if (input[k] == 0) continue;
    const auto attr = model.attribute_of(static_cast<int>(k));
    if (!attr) {
      unseen = true;
      continue;
    }
    for (int c = 0; c < 2; ++c) pred.log_scores[c] += input[k] * std::log(model.probabilities[c][*attr]);
  }
  if (unseen) pred.log_scores[0] = -std::numeric_limits<double>::infinity();

  const double m = std::max(pred.log_scores[0], pred.log_scores[1]);
  if (std::isfinite(m)) {
    const double e0 = std::exp(pred.log_scores[0] - m);
    const double e1 = std::exp(pred.log_scores[1] - m);
    pred.probabilities = {e0 / (e0 + e1), e1 / (e0 + e1)};
  } else {
    pred.probabilities = {0.5, 0.5};
  }
  pred.label = pred.log_scores[1] > pred.log_scores[0] ? Adherence::Violation : Adherence::Adherence;
  return pred;
}

std::vector<ProjectedPoint> lda_projection(const std::vector<CountVector>& inputs,
                                           const AdherenceLabels& labels, const NaiveBayesModel& model) {
  if (inputs.size() != labels.size() || inputs.empty()) {
    throw Error(ErrorCode::InvalidArgument, "projection needs matching, non-empty inputs and labels");
  }
  std::size_t width = 0;
  for (const auto& p : inputs) width = std::max(width, p.size());
  const auto d = static_cast<Eigen::Index>(width);
  auto features = [&](const CountVector& p) {
    Eigen::VectorXd f = Eigen::VectorXd::Zero(d);
    for (std::size_t k = 0; k < p.size(); ++k) f(static_cast<Eigen::Index>(k)) = std::log1p(p[k]);
    return f;
  };

  std::array<Eigen::VectorXd, 2> mean{Eigen::VectorXd::Zero(d), Eigen::VectorXd::Zero(d)};
  std::array<double, 2> n{0.0, 0.0};
  Eigen::VectorXd grand = Eigen::VectorXd::Zero(d);
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    const int c = labels[t] == Adherence::Adherence ? 0 : 1;
    const Eigen::VectorXd f = features(inputs[t]);
    mean[c] += f;
    n[c] += 1.0;
    grand += f;
  }
  grand /= static_cast<double>(inputs.size());
  for (int c = 0; c < 2; ++c) {
    if (n[c] > 0.0) mean[c] /= n[c];
  }
  Eigen::MatrixXd within = Eigen::MatrixXd::Zero(d, d), total = Eigen::MatrixXd::Zero(d, d);
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    const int c = labels[t] == Adherence::Adherence ? 0 : 1;
    const Eigen::VectorXd f = features(inputs[t]);
    within += (f - mean[c]) * (f - mean[c]).transpose();
    total += (f - grand) * (f - grand).transpose();
  }
  within += 1e-6 * (within.trace() / static_cast<double>(d) + 1.0) * Eigen::MatrixXd::Identity(d, d);

  Eigen::VectorXd w1 = within.ldlt().solve(mean[0] - mean[1]);
  if (w1.norm() == 0.0) w1 = Eigen::VectorXd::Unit(d, 0);
  w1.normalize();
  const Eigen::MatrixXd proj = Eigen::MatrixXd::Identity(d, d) - w1 * w1.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(proj * total * proj);
  Eigen::VectorXd w2 = eig.eigenvectors().col(d - 1);
  // Fix the sign so the output is reproducible.
  Eigen::Index pivot;
  w2.cwiseAbs().maxCoeff(&pivot);
  if (w2(pivot) < 0) w2 = -w2;

  std::vector<ProjectedPoint> out;
  out.reserve(inputs.size());
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    const Eigen::VectorXd f = features(inputs[t]) - grand;
    out.push_back({f.dot(w1), f.dot(w2), labels[t]});
  }

  // Boundary: two-attribute inputs with equal class scores at the typical total count.
  double scale = 0.0;
  for (const auto& p : inputs) scale += std::accumulate(p.begin(), p.end(), 0.0);
  scale /= static_cast<double>(inputs.size());
  const double bias = std::log(model.priors[0]) - std::log(model.priors[1]);
  const auto& states = model.attribute_states;
  for (std::size_t i = 0; i < states.size(); ++i) {
    const double di = std::log(model.probabilities[0][i]) - std::log(model.probabilities[1][i]);
    for (std::size_t j = 0; j < states.size(); ++j) {
      const double dj = std::log(model.probabilities[0][j]) - std::log(model.probabilities[1][j]);
      if (!(di > 0.0 && dj < 0.0)) continue;
      const double a = -(scale * dj + bias) / (di - dj);
      if (a < 0.0 || a > scale) continue;
      Eigen::VectorXd f = Eigen::VectorXd::Zero(d);
      if (static_cast<Eigen::Index>(states[i]) < d) f(states[i]) = std::log1p(a);
      if (static_cast<Eigen::Index>(states[j]) < d) f(states[j]) = std::log1p(scale - a);
      f -= grand;
      out.push_back({f.dot(w1), f.dot(w2), std::nullopt});
    }
  }
  return out;
}

}  // namespace qcseg
