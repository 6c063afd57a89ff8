#include "qcseg/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "qcseg/error.hpp"
#include "qcseg/rng.hpp"

namespace qcseg {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

double log_sum_exp(const double* v, int n) {
  double m = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) m = std::max(m, v[i]);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += std::exp(v[i] - m);
  return m + std::log(s);
}

struct EmRun {
  GmmParams params;
  std::vector<double> resp;
  std::vector<double> trace;
  bool converged = false;
};

// Initial parameters from contiguous quantile groups of the sorted data,
// split at `cuts` (fractions in (0,1), ascending, K-1 of them).
GmmParams init_from_quantiles(const std::vector<double>& sorted, const std::vector<double>& cuts,
                              double var_floor) {
  const int k = static_cast<int>(cuts.size()) + 1;
  const std::size_t n = sorted.size();
  GmmParams p;
  std::size_t begin = 0;
  for (int c = 0; c < k; ++c) {
    std::size_t end = c + 1 < k ? static_cast<std::size_t>(std::lround(cuts[c] * n)) : n;
    end = std::clamp(end, begin + 1, n - static_cast<std::size_t>(k - c - 1));
    double mean = 0.0;
    for (std::size_t i = begin; i < end; ++i) mean += sorted[i];
    mean /= static_cast<double>(end - begin);
    double var = 0.0;
    for (std::size_t i = begin; i < end; ++i) var += (sorted[i] - mean) * (sorted[i] - mean);
    var /= static_cast<double>(end - begin);
    p.means.push_back(mean);
    p.variances.push_back(std::max(var, var_floor));
    p.weights.push_back(static_cast<double>(end - begin) / static_cast<double>(n));
    begin = end;
  }
  return p;
}

EmRun run_em(const std::vector<double>& x, GmmParams p, const GmmOptions& opt, double var_floor) {
  const int k = p.components();
  const std::size_t n = x.size();
  EmRun run;
  run.resp.assign(n * static_cast<std::size_t>(k), 0.0);
  std::vector<double> lp(static_cast<std::size_t>(k));
  double prev = -std::numeric_limits<double>::infinity();

  for (int it = 0; it < opt.max_iterations; ++it) {
    // E step
    double ll = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      for (int c = 0; c < k; ++c) lp[c] = p.joint_log_density(c, x[t]);
      const double norm = log_sum_exp(lp.data(), k);
      ll += norm;
      for (int c = 0; c < k; ++c) run.resp[t * k + c] = std::exp(lp[c] - norm);
    }
    run.trace.push_back(ll);
    if (std::abs(ll - prev) <= opt.tolerance * std::abs(ll)) {
      run.converged = true;
      break;
    }
    prev = ll;

    // M step
    for (int c = 0; c < k; ++c) {
      double nk = 0.0, sx = 0.0;
      for (std::size_t t = 0; t < n; ++t) {
        nk += run.resp[t * k + c];
        sx += run.resp[t * k + c] * x[t];
      }
      const double mean = nk > 0.0 ? sx / nk : p.means[c];
      double sv = 0.0;
      for (std::size_t t = 0; t < n; ++t) sv += run.resp[t * k + c] * (x[t] - mean) * (x[t] - mean);
      const double var = nk > 0.0 ? sv / nk : p.variances[c];
      p.means[c] = mean;
      p.variances[c] = std::max(var, var_floor);
      p.weights[c] = nk / static_cast<double>(n);
      if (p.variances[c] <= var_floor && p.weights[c] < 1e-6) {
        throw Error(ErrorCode::DegenerateComponent,
                    "component " + std::to_string(c) + " collapsed onto a point");
      }
    }
    const double wsum = std::accumulate(p.weights.begin(), p.weights.end(), 0.0);
    for (double& w : p.weights) w /= wsum;
  }
  run.params = std::move(p);
  return run;
}

}  // namespace

double GmmParams::joint_log_density(int k, double x) const {
  const double d = x - means[k];
  return std::log(weights[k]) - 0.5 * (kLog2Pi + std::log(variances[k]) + d * d / variances[k]);
}

double gmm_loglik(const GmmParams& params, const std::vector<double>& x) {
  const int k = params.components();
  std::vector<double> lp(static_cast<std::size_t>(k));
  double ll = 0.0;
  for (double v : x) {
    for (int c = 0; c < k; ++c) lp[c] = params.joint_log_density(c, v);
    ll += log_sum_exp(lp.data(), k);
  }
  return ll;
}

GmmFit fit_gmm_em(const ScalarSeries& data, const GmmOptions& options) {
  const int k = options.components;
  if (k < 1) throw Error(ErrorCode::InvalidArgument, "component count must be >= 1");
  const auto& x = data.values;
  if (x.size() < static_cast<std::size_t>(10 * k)) {
    throw Error(ErrorCode::TooFewPoints, "need at least " + std::to_string(10 * k) +
                                             " points for " + std::to_string(k) + " components");
  }
  const double n = static_cast<double>(x.size());
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= n;
  if (!(var > 0.0)) {
    throw Error(ErrorCode::DegenerateComponent, "all data points are identical");
  }
  const double var_floor = 1e-8 * var;

  std::vector<double> sorted = x;
  std::sort(sorted.begin(), sorted.end());

  Rng rng = make_rng(options.seed, "gmm-restarts");
  std::uniform_real_distribution<double> jitter(-0.5, 0.5);
  EmRun best;
  double best_ll = -std::numeric_limits<double>::infinity();
  const int restarts = std::max(1, options.restarts);
  for (int r = 0; r < restarts; ++r) {
    std::vector<double> cuts;
    for (int c = 1; c < k; ++c) {
      double q = static_cast<double>(c) / k;
      // Restart 0 is the plain quantile split; the rest move the cut points.
      if (r > 0) q += jitter(rng) / k;
      cuts.push_back(std::clamp(q, 0.01, 0.99));
    }
    std::sort(cuts.begin(), cuts.end());
    EmRun run = run_em(x, init_from_quantiles(sorted, cuts, var_floor), options, var_floor);
    if (run.trace.back() > best_ll) {
      best_ll = run.trace.back();
      best = std::move(run);
    }
  }

  GmmFit fit;
  fit.params = std::move(best.params);
  fit.responsibilities = std::move(best.resp);
  fit.loglik_trace = std::move(best.trace);
  fit.loglik = best_ll;
  fit.converged = best.converged;
  return fit;
}

StateSequence map_assign(const GmmParams& params, const ScalarSeries& data) {
  const int k = params.components();
  StateSequence out;
  out.indicators.reserve(data.size());
  for (double v : data.values) {
    int arg = 0;
    double best = params.joint_log_density(0, v);
    for (int c = 1; c < k; ++c) {
      const double lp = params.joint_log_density(c, v);
      if (lp > best) {
        best = lp;
        arg = c;
      }
    }
    out.indicators.push_back(arg);
  }
  return out;
}

MedianSmoothResult median_smooth_to_convergence(const StateSequence& indicators, int window,
                                                int max_passes) {
  if (window % 2 == 0) throw Error(ErrorCode::EvenWindow, "median window must be odd");
  if (window < 3) throw Error(ErrorCode::InvalidArgument, "median window must be >= 3");
  const auto& in = indicators.indicators;
  const auto n = static_cast<std::ptrdiff_t>(in.size());
  const std::ptrdiff_t half = window / 2;

  MedianSmoothResult res;
  std::vector<int> cur = in, next(in.size()), buf(static_cast<std::size_t>(window));
  for (int pass = 0; pass < max_passes; ++pass) {
    bool changed = false;
    for (std::ptrdiff_t t = 0; t < n; ++t) {
      for (std::ptrdiff_t j = -half; j <= half; ++j) {
        buf[static_cast<std::size_t>(j + half)] = cur[std::clamp<std::ptrdiff_t>(t + j, 0, n - 1)];
      }
      std::nth_element(buf.begin(), buf.begin() + half, buf.end());
      next[t] = buf[half];
      changed = changed || next[t] != cur[t];
    }
    if (!changed) break;
    cur.swap(next);
    ++res.passes;
  }
  res.states.indicators = std::move(cur);
  return res;
}

AdherenceLabels mean_rule_adherence(const GmmParams& params, const StateSequence& smoothed,
                                    TestKind kind) {
  if (params.components() != 2) {
    throw Error(ErrorCode::InvalidArgument, "adherence orientation needs exactly 2 components");
  }
  if (std::abs(params.means[0] - params.means[1]) <= 1e-9) {
    throw Error(ErrorCode::EqualMeans, "component means coincide; cannot orient labels");
  }
  const int larger = params.means[1] > params.means[0] ? 1 : 0;
  const Adherence larger_label =
      kind == TestKind::Balance ? Adherence::Violation : Adherence::Adherence;
  const Adherence smaller_label =
      larger_label == Adherence::Adherence ? Adherence::Violation : Adherence::Adherence;
  AdherenceLabels out;
  out.reserve(smoothed.size());
  for (int z : smoothed.indicators) out.push_back(z == larger ? larger_label : smaller_label);
  return out;
}

int default_median_window(double rate, double seconds) {
  int w = static_cast<int>(std::ceil(rate * seconds));
  if (w % 2 == 0) ++w;
  return std::max(w, 3);
}

GmmSegmentation segment_gmm(const ScalarSeries& data, TestKind kind, int window,
                            const GmmOptions& options) {
  GmmSegmentation seg;
  seg.fit = fit_gmm_em(data, options);
  seg.raw = map_assign(seg.fit.params, data);
  seg.smoothed = median_smooth_to_convergence(seg.raw, window).states;
  seg.labels = mean_rule_adherence(seg.fit.params, seg.smoothed, kind);
  return seg;
}

}  // namespace qcseg
