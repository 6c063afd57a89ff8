#include "qcseg/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "qcseg/error.hpp"
#include "qcseg/rng.hpp"

namespace qcseg {

std::string_view to_string(MetricDefinition d) {
  return d == MetricDefinition::Predictive ? "predictive" : "recall";
}

MetricDefinition metric_definition_from_string(std::string_view name) {
  if (name == "predictive") return MetricDefinition::Predictive;
  if (name == "recall") return MetricDefinition::Recall;
  throw Error(ErrorCode::InvalidArgument, "unknown metric definition '" + std::string(name) + "'");
}

std::string_view to_string(FoldStrategy s) {
  return s == FoldStrategy::ContiguousBlocks ? "blocks" : "shuffled";
}

FoldStrategy fold_strategy_from_string(std::string_view name) {
  if (name == "blocks") return FoldStrategy::ContiguousBlocks;
  if (name == "shuffled") return FoldStrategy::Shuffled;
  throw Error(ErrorCode::InvalidArgument, "unknown fold strategy '" + std::string(name) + "'");
}

double FoldMetrics::require_ba() const {
  if (!ba) throw Error(ErrorCode::EmptyDenominator, "balanced accuracy undefined: a class has no members");
  return *ba;
}

template <typename Label>
FoldMetrics binary_metrics(const std::vector<Label>& predicted, const std::vector<Label>& truth,
                           const Label& positive, MetricDefinition def) {
  if (predicted.size() != truth.size()) {
    throw Error(ErrorCode::InvalidArgument, "predicted and true labels differ in length");
  }
  std::size_t both_pos = 0, both_neg = 0, pred_pos = 0, pred_neg = 0, true_pos = 0, true_neg = 0;
  for (std::size_t t = 0; t < truth.size(); ++t) {
    const bool p = predicted[t] == positive;
    const bool u = truth[t] == positive;
    pred_pos += p;
    pred_neg += !p;
    true_pos += u;
    true_neg += !u;
    both_pos += p && u;
    both_neg += !p && !u;
  }
  const std::size_t den_pos = def == MetricDefinition::Predictive ? pred_pos : true_pos;
  const std::size_t den_neg = def == MetricDefinition::Predictive ? pred_neg : true_neg;
  FoldMetrics m;
  m.size = truth.size();
  if (den_pos > 0) m.tp = static_cast<double>(both_pos) / static_cast<double>(den_pos);
  if (den_neg > 0) m.tn = static_cast<double>(both_neg) / static_cast<double>(den_neg);
  if (m.tp && m.tn) m.ba = (*m.tp + *m.tn) / 2.0;
  return m;
}

template FoldMetrics binary_metrics<Adherence>(const std::vector<Adherence>&, const std::vector<Adherence>&,
                                               const Adherence&, MetricDefinition);
template FoldMetrics binary_metrics<int>(const std::vector<int>&, const std::vector<int>&, const int&,
                                         MetricDefinition);
template FoldMetrics binary_metrics<std::string>(const std::vector<std::string>&,
                                                 const std::vector<std::string>&, const std::string&,
                                                 MetricDefinition);

FoldMetrics tp_tn_ba(const AdherenceLabels& predicted, const AdherenceLabels& truth, MetricDefinition def) {
  return binary_metrics(predicted, truth, Adherence::Adherence, def);
}

std::vector<std::pair<std::string, FoldMetrics>> per_behaviour_metrics(const std::vector<std::string>& predicted,
                                                                       const std::vector<std::string>& truth,
                                                                       MetricDefinition def) {
  const std::set<std::string> names(truth.begin(), truth.end());
  std::vector<std::pair<std::string, FoldMetrics>> out;
  for (const auto& name : names) {
    if (name.empty()) continue;
    out.emplace_back(name, binary_metrics(predicted, truth, name, def));
  }
  return out;
}

std::vector<std::vector<std::size_t>> make_folds(std::size_t n, int k, FoldStrategy strategy,
                                                 std::uint64_t seed) {
  if (k < 2) throw Error(ErrorCode::InvalidArgument, "need at least 2 folds");
  if (n < static_cast<std::size_t>(k)) {
    throw Error(ErrorCode::FoldTooSmall,
                std::to_string(n) + " items cannot fill " + std::to_string(k) + " folds");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (strategy == FoldStrategy::Shuffled) {
    Rng rng = make_rng(seed, "cv-folds");
    std::shuffle(order.begin(), order.end(), rng);
  }
  std::vector<std::vector<std::size_t>> folds(static_cast<std::size_t>(k));
  for (std::size_t f = 0; f < folds.size(); ++f) {
    const std::size_t begin = f * n / folds.size();
    const std::size_t end = (f + 1) * n / folds.size();
    folds[f].assign(order.begin() + static_cast<std::ptrdiff_t>(begin),
                    order.begin() + static_cast<std::ptrdiff_t>(end));
    std::sort(folds[f].begin(), folds[f].end());
  }
  return folds;
}

namespace {

void mean_std(const std::vector<FoldMetrics>& folds, std::optional<double> FoldMetrics::*field,
              std::optional<double>& mean, std::optional<double>& sd) {
  std::vector<double> v;
  for (const auto& f : folds) {
    if (f.*field) v.push_back(*(f.*field));
  }
  if (v.empty()) return;
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  mean = m;
  sd = std::sqrt(ss / static_cast<double>(v.size()));
}

}  // namespace

MetricsReport summarize(std::vector<FoldMetrics> folds) {
  MetricsReport r;
  r.folds = std::move(folds);
  r.k = static_cast<int>(r.folds.size());
  for (const auto& f : r.folds) r.undefined_folds += f.defined() ? 0 : 1;
  mean_std(r.folds, &FoldMetrics::tp, r.tp_mean, r.tp_std);
  mean_std(r.folds, &FoldMetrics::tn, r.tn_mean, r.tn_std);
  mean_std(r.folds, &FoldMetrics::ba, r.ba_mean, r.ba_std);
  return r;
}

MetricsReport kfold_cv(const AdherenceLabels& labels, const CvPipeline& pipeline, const CvOptions& options,
                       AdherenceLabels* out_of_fold) {
  if (out_of_fold) out_of_fold->assign(labels.size(), Adherence::Adherence);
  const auto folds = make_folds(labels.size(), options.folds, options.strategy, options.seed);
  std::vector<FoldMetrics> results;
  std::vector<char> in_test(labels.size());
  for (std::size_t f = 0; f < folds.size(); ++f) {
    const auto& test = folds[f];
    if (test.empty()) throw Error(ErrorCode::FoldTooSmall, "fold " + std::to_string(f + 1) + " is empty");
    std::fill(in_test.begin(), in_test.end(), 0);
    for (auto i : test) in_test[i] = 1;
    std::vector<std::size_t> train;
    train.reserve(labels.size() - test.size());
    bool has[2] = {false, false};
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (in_test[i]) continue;
      train.push_back(i);
      has[labels[i] == Adherence::Adherence ? 0 : 1] = true;
    }
    if (!has[0] || !has[1]) {
      throw Error(ErrorCode::FoldTooSmall,
                  "training split of fold " + std::to_string(f + 1) + " contains a single class");
    }
    const AdherenceLabels pred = pipeline(train, test);
    if (pred.size() != test.size()) {
      throw Error(ErrorCode::InvalidArgument, "pipeline returned the wrong number of predictions");
    }
    AdherenceLabels truth;
    truth.reserve(test.size());
    for (auto i : test) truth.push_back(labels[i]);
    if (out_of_fold) {
      for (std::size_t j = 0; j < test.size(); ++j) (*out_of_fold)[test[j]] = pred[j];
    }
    results.push_back(tp_tn_ba(pred, truth, options.definition));
  }
  MetricsReport r = summarize(std::move(results));
  r.strategy = options.strategy;
  r.definition = options.definition;
  r.seed = options.seed;
  return r;
}

CvPipeline naive_bayes_pipeline(const std::vector<CountVector>& inputs, const AdherenceLabels& labels,
                                double smoothing, std::vector<double>* confidence) {
  if (inputs.size() != labels.size()) {
    throw Error(ErrorCode::InvalidArgument, "inputs and labels differ in length");
  }
  return [&inputs, &labels, smoothing, confidence](const std::vector<std::size_t>& train,
                                       const std::vector<std::size_t>& test) {
    std::vector<CountVector> x;
    AdherenceLabels u;
    x.reserve(train.size());
    u.reserve(train.size());
    for (auto i : train) {
      x.push_back(inputs[i]);
      u.push_back(labels[i]);
    }
    const NaiveBayesModel model = nb_train(x, u, smoothing);
    AdherenceLabels out;
    out.reserve(test.size());
    if (confidence && confidence->size() < inputs.size()) confidence->resize(inputs.size(), 0.0);
    for (auto i : test) {
      const NbPrediction p = nb_predict(model, inputs[i]);
      out.push_back(p.label);
      if (confidence) (*confidence)[i] = p.confidence();
    }
    return out;
  };
}

MetricsReport shuffled_baseline(const std::vector<CountVector>& inputs, const AdherenceLabels& labels,
                                const CvOptions& options, std::uint64_t shuffle_seed, double smoothing) {
  std::vector<CountVector> permuted = inputs;
  Rng rng = make_rng(shuffle_seed, "shuffled-baseline");
  std::shuffle(permuted.begin(), permuted.end(), rng);
  return kfold_cv(labels, naive_bayes_pipeline(permuted, labels, smoothing), options);
}

MetricsReport shuffled_baseline(const StateSequence& z, int states, const AdherenceLabels& labels,
                                const CvOptions& options, std::uint64_t shuffle_seed, double smoothing,
                                int scale) {
  return shuffled_baseline(counts_from_states(z, states, scale), labels, options, shuffle_seed, smoothing);
}

double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) throw Error(ErrorCode::InvalidArgument, "labelings differ in length");
  std::map<std::pair<int, int>, double> joint;
  std::map<int, double> ra, rb;
  for (std::size_t i = 0; i < a.size(); ++i) {
    joint[{a[i], b[i]}] += 1.0;
    ra[a[i]] += 1.0;
    rb[b[i]] += 1.0;
  }
  auto c2 = [](double n) { return n * (n - 1.0) / 2.0; };
  double sum_ij = 0.0, sum_a = 0.0, sum_b = 0.0;
  for (const auto& [k, v] : joint) sum_ij += c2(v);
  for (const auto& [k, v] : ra) sum_a += c2(v);
  for (const auto& [k, v] : rb) sum_b += c2(v);
  const double total = c2(static_cast<double>(a.size()));
  const double expected = sum_a * sum_b / total;
  const double max_index = 0.5 * (sum_a + sum_b);
  if (max_index == expected) return 1.0;
  return (sum_ij - expected) / (max_index - expected);
}

}  // namespace qcseg
