#include "qcseg/hdp_ar.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <set>

#include "qcseg/error.hpp"

namespace qcseg {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

// log of a Gamma(shape, 1) variate; stable for very small shapes.
double log_gamma_variate(double shape, Rng& rng) {
  if (shape >= 1.0) {
    std::gamma_distribution<double> g(shape, 1.0);
    return std::log(std::max(g(rng), std::numeric_limits<double>::min()));
  }
  std::gamma_distribution<double> g(shape + 1.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double v;
  do {
    v = u(rng);
  } while (v <= 0.0);
  return std::log(std::max(g(rng), std::numeric_limits<double>::min())) + std::log(v) / shape;
}

std::vector<double> sample_dirichlet(std::span<const double> concentration, Rng& rng) {
  std::vector<double> logs(concentration.size());
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < concentration.size(); ++i) {
    logs[i] = log_gamma_variate(concentration[i], rng);
    m = std::max(m, logs[i]);
  }
  double s = 0.0;
  for (double& l : logs) {
    l = std::exp(l - m);
    s += l;
  }
  // Entries that underflow are kept strictly positive so log-probabilities stay finite.
  double total = 0.0;
  for (double& l : logs) {
    l = std::max(l / s, 1e-300);
    total += l;
  }
  for (double& l : logs) l /= total;
  return logs;
}

int sample_categorical(std::span<const double> weights, double total, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, total);
  const double target = u(rng);
  double acc = 0.0;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    acc += weights[k];
    if (target < acc) return static_cast<int>(k);
  }
  // Rounding: fall back to the last positive weight.
  for (std::size_t k = weights.size(); k-- > 0;) {
    if (weights[k] > 0.0) return static_cast<int>(k);
  }
  return 0;
}

double stationary_mean(const ArState& s) {
  const double sum = std::accumulate(s.coefficients.begin(), s.coefficients.end(), 0.0);
  return std::abs(1.0 - sum) > 1e-6 ? s.mean / (1.0 - sum) : s.mean;
}

double predictive_mean(const ArState& s, std::span<const double> data, std::size_t t) {
  double m = s.mean;
  for (int j = 1; j <= s.order(); ++j) m += s.coefficients[j - 1] * data[t - j];
  return m;
}

}  // namespace

double ar_loglik(const ArState& state, std::span<const double> window, double x) {
  const int r = state.order();
  if (static_cast<int>(window.size()) != r) {
    throw Error(ErrorCode::WrongWindowLength, "window has " + std::to_string(window.size()) +
                                                  " values, order is " + std::to_string(r));
  }
  double m = state.mean;
  for (int j = 1; j <= r; ++j) m += state.coefficients[j - 1] * window[r - j];
  const double d = x - m;
  return -0.5 * (kLog2Pi + std::log(state.variance) + d * d / state.variance);
}

SpectrumEstimate ar_psd(const ArState& state, std::span<const double> normalized_freqs) {
  SpectrumEstimate out;
  out.method = "ar-closed-form";
  out.frequencies.assign(normalized_freqs.begin(), normalized_freqs.end());
  out.power.reserve(normalized_freqs.size());
  for (double f : normalized_freqs) {
    std::complex<double> denom = 1.0;
    for (int j = 1; j <= state.order(); ++j) {
      denom -= state.coefficients[j - 1] * std::polar(1.0, -2.0 * std::numbers::pi * f * j);
    }
    out.power.push_back(state.variance / std::norm(denom));
  }
  return out;
}

EmissionPrior EmissionPrior::from_data(std::span<const double> x) {
  EmissionPrior p;
  if (x.empty()) return p;
  const double n = static_cast<double>(x.size());
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var = std::max(var / n, 1e-12);
  p.center = mean;
  p.coef_variance = 10.0 / var;
  p.intercept_variance = 10.0;
  p.shape = 2.0;
  p.scale = 0.5 * var;
  return p;
}

RegressionStats::RegressionStats(int order_)
    : order(order_),
      gram(static_cast<std::size_t>((order_ + 1) * (order_ + 1)), 0.0),
      cross(static_cast<std::size_t>(order_ + 1), 0.0) {}

void RegressionStats::add(std::span<const double> window, double x, double center) {
  const int p = order + 1;
  double h[64];
  for (int j = 1; j <= order; ++j) h[j - 1] = window[order - j] - center;
  h[order] = 1.0;
  const double y = x - center;
  for (int a = 0; a < p; ++a) {
    cross[a] += h[a] * y;
    for (int b = 0; b < p; ++b) gram[a * p + b] += h[a] * h[b];
  }
  yy += y * y;
  ++count;
}

EmissionPosterior emission_posterior(const EmissionPrior& prior, const RegressionStats& stats) {
  const int p = stats.order + 1;
  Eigen::MatrixXd lambda = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      stats.gram.data(), p, p);
  for (int j = 0; j < stats.order; ++j) lambda(j, j) += 1.0 / prior.coef_variance;
  lambda(stats.order, stats.order) += 1.0 / prior.intercept_variance;
  const Eigen::Map<const Eigen::VectorXd> cross(stats.cross.data(), p);
  Eigen::LLT<Eigen::MatrixXd> llt(lambda);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::NumericalUnderflow, "emission posterior precision not positive definite");
  }
  const Eigen::VectorXd mean = llt.solve(cross);
  const Eigen::MatrixXd cov = llt.solve(Eigen::MatrixXd::Identity(p, p));

  EmissionPosterior post;
  post.mean.assign(mean.data(), mean.data() + p);
  post.covariance.resize(static_cast<std::size_t>(p * p));
  for (int a = 0; a < p; ++a) {
    for (int b = 0; b < p; ++b) post.covariance[a * p + b] = cov(a, b);
  }
  post.shape = prior.shape + 0.5 * static_cast<double>(stats.count);
  post.scale = prior.scale + 0.5 * std::max(0.0, stats.yy - mean.dot(lambda * mean));
  return post;
}

ArState sample_emission(const EmissionPrior& prior, const RegressionStats& stats, Rng& rng) {
  const int p = stats.order + 1;
  const EmissionPosterior post = emission_posterior(prior, stats);
  std::gamma_distribution<double> g(post.shape, 1.0);
  double variance = post.scale / std::max(g(rng), std::numeric_limits<double>::min());
  variance = std::max(variance, 1e-12 * prior.scale);

  const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> cov(
      post.covariance.data(), p, p);
  const Eigen::LLT<Eigen::MatrixXd> llt{Eigen::MatrixXd(cov)};
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd eps(p);
  for (int a = 0; a < p; ++a) eps(a) = normal(rng);
  const Eigen::VectorXd theta =
      Eigen::Map<const Eigen::VectorXd>(post.mean.data(), p) + std::sqrt(variance) * Eigen::VectorXd(llt.matrixL() * eps);

  ArState s;
  s.coefficients.assign(theta.data(), theta.data() + stats.order);
  const double sum = std::accumulate(s.coefficients.begin(), s.coefficients.end(), 0.0);
  s.mean = prior.center * (1.0 - sum) + theta(stats.order);
  s.variance = variance;
  return s;
}

void HdpArConfig::validate() const {
  if (order < 0 || order > 32) throw Error(ErrorCode::InvalidArgument, "AR order must be in [0, 32]");
  if (truncation < 2) throw Error(ErrorCode::InvalidArgument, "truncation must be >= 2");
  if (!(alpha > 0.0) || !(gamma > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "concentrations must be > 0");
  }
  if (!(kappa >= 0.0)) throw Error(ErrorCode::InvalidArgument, "kappa must be >= 0");
  if (sweeps < 0 || burn_in < 0) throw Error(ErrorCode::InvalidArgument, "sweeps and burn-in must be >= 0");
  if (sweeps > 0 && burn_in >= sweeps) {
    throw Error(ErrorCode::InvalidArgument, "burn-in must be smaller than the sweep count");
  }
}

void SwitchingArModel::validate() const {
  const auto l = static_cast<std::size_t>(truncation);
  if (truncation < 2) throw Error(ErrorCode::InvalidArgument, "truncation must be >= 2");
  if (states.size() != l || transition.size() != l * l || beta.size() != l) {
    throw Error(ErrorCode::InvalidArgument, "model dimensions disagree with truncation");
  }
  if (!(alpha > 0.0) || !(gamma > 0.0) || !(kappa >= 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "invalid concentration parameters");
  }
  for (const auto& s : states) {
    if (s.order() != order || !(s.variance > 0.0)) {
      throw Error(ErrorCode::InvalidArgument, "invalid AR state");
    }
  }
}

std::vector<double> emission_loglik_matrix(const SwitchingArModel& model, std::span<const double> data) {
  const auto r = static_cast<std::size_t>(model.order);
  const auto l = static_cast<std::size_t>(model.truncation);
  const std::size_t n = data.size() - r;
  std::vector<double> ll(n * l);
  std::vector<double> log_norm(l);
  for (std::size_t k = 0; k < l; ++k) log_norm[k] = -0.5 * (kLog2Pi + std::log(model.states[k].variance));
  for (std::size_t t = r; t < data.size(); ++t) {
    for (std::size_t k = 0; k < l; ++k) {
      const auto& s = model.states[k];
      const double d = data[t] - predictive_mean(s, data, t);
      ll[(t - r) * l + k] = log_norm[k] - 0.5 * d * d / s.variance;
    }
  }
  return ll;
}

double complete_data_loglik(const SwitchingArModel& model, std::span<const double> data,
                            std::span<const int> z) {
  const auto r = static_cast<std::size_t>(model.order);
  if (z.size() != data.size() || data.size() <= r) {
    throw Error(ErrorCode::InvalidArgument, "indicator and data lengths disagree");
  }
  double ll = 0.0;
  for (std::size_t t = r; t < data.size(); ++t) {
    const auto& s = model.states[static_cast<std::size_t>(z[t])];
    const double d = data[t] - predictive_mean(s, data, t);
    ll += -0.5 * (kLog2Pi + std::log(s.variance) + d * d / s.variance);
    if (t > r) ll += std::log(model.pi(z[t - 1], z[t]));
  }
  return ll;
}

std::vector<int> sample_states(const SwitchingArModel& model, std::span<const double> data, Rng& rng) {
  const auto r = static_cast<std::size_t>(model.order);
  const auto l = static_cast<std::size_t>(model.truncation);
  if (data.size() <= r) throw Error(ErrorCode::TooShort, "data shorter than AR order");
  const std::size_t n = data.size() - r;

  // Scaled likelihoods; each row divided by its max.
  std::vector<double> like = emission_loglik_matrix(model, data);
  for (std::size_t u = 0; u < n; ++u) {
    double* row = &like[u * l];
    const double m = *std::max_element(row, row + l);
    if (!std::isfinite(m)) throw Error(ErrorCode::NumericalUnderflow, "non-finite emission likelihood");
    for (std::size_t k = 0; k < l; ++k) row[k] = std::exp(row[k] - m);
  }

  std::vector<double> back(n * l, 1.0), tmp(l);
  for (std::size_t u = n - 1; u-- > 0;) {
    const double* next = &back[(u + 1) * l];
    const double* e = &like[(u + 1) * l];
    for (std::size_t k = 0; k < l; ++k) tmp[k] = e[k] * next[k];
    double* cur = &back[u * l];
    double total = 0.0;
    for (std::size_t j = 0; j < l; ++j) {
      const double* row = &model.transition[j * l];
      double s = 0.0;
      for (std::size_t k = 0; k < l; ++k) s += row[k] * tmp[k];
      cur[j] = s;
      total += s;
    }
    if (!(total > 0.0) || !std::isfinite(total)) {
      throw Error(ErrorCode::NumericalUnderflow, "backward message vanished at t=" + std::to_string(u + r));
    }
    for (std::size_t j = 0; j < l; ++j) cur[j] /= total;
  }

  std::vector<int> z(data.size());
  std::vector<double> w(l);
  for (std::size_t u = 0; u < n; ++u) {
    double total = 0.0;
    for (std::size_t k = 0; k < l; ++k) {
      const double prior = u == 0 ? 1.0 : model.pi(z[u + r - 1], static_cast<int>(k));
      w[k] = prior * like[u * l + k] * back[u * l + k];
      total += w[k];
    }
    if (!(total > 0.0) || !std::isfinite(total)) {
      throw Error(ErrorCode::NumericalUnderflow, "forward sampling weights vanished at t=" + std::to_string(u + r));
    }
    z[u + r] = sample_categorical(w, total, rng);
  }
  for (std::size_t t = 0; t < r; ++t) z[t] = z[r];
  return z;
}

std::vector<double> simulate_along(std::span<const ArState> states, std::span<const int> z, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> x(z.size());
  for (std::size_t t = 0; t < z.size(); ++t) {
    const auto& s = states[static_cast<std::size_t>(z[t])];
    double m = s.mean;
    for (int j = 1; j <= s.order(); ++j) {
      const double lag = t >= static_cast<std::size_t>(j) ? x[t - j] : stationary_mean(s);
      m += s.coefficients[j - 1] * lag;
    }
    x[t] = m + std::sqrt(s.variance) * normal(rng);
  }
  return x;
}

SimulatedPath simulate(const SwitchingArModel& model, std::size_t length, std::uint64_t seed, double rate) {
  model.validate();
  if (length <= static_cast<std::size_t>(model.order)) {
    throw Error(ErrorCode::TooShort, "simulation length must exceed the AR order");
  }
  Rng chain_rng = make_rng(seed, "simulate-chain");
  Rng noise_rng = make_rng(seed, "simulate-noise");
  const auto l = static_cast<std::size_t>(model.truncation);
  std::vector<int> z(length);
  z[0] = sample_categorical(model.beta, 1.0, chain_rng);
  for (std::size_t t = 1; t < length; ++t) {
    const std::span<const double> row(&model.transition[static_cast<std::size_t>(z[t - 1]) * l], l);
    z[t] = sample_categorical(row, std::accumulate(row.begin(), row.end(), 0.0), chain_rng);
  }
  SimulatedPath out;
  out.series = ScalarSeries{rate, simulate_along(model.states, z, noise_rng), ScalarUnit::Raw};
  out.truth.indicators = std::move(z);
  return out;
}

void resample_parameters(SwitchingArModel& model, std::span<const double> data, std::span<const int> z,
                         Rng& rng) {
  const auto r = static_cast<std::size_t>(model.order);
  const auto l = static_cast<std::size_t>(model.truncation);

  std::vector<double> counts(l * l, 0.0);
  for (std::size_t t = r + 1; t < data.size(); ++t) counts[z[t - 1] * l + z[t]] += 1.0;

  // Auxiliary table counts (Chinese restaurant table draws).
  std::vector<double> tables(l, 0.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double rho = model.kappa / (model.alpha + model.kappa);
  for (std::size_t j = 0; j < l; ++j) {
    for (std::size_t k = 0; k < l; ++k) {
      const auto n = static_cast<long>(counts[j * l + k]);
      if (n == 0) continue;
      const double a = model.alpha * model.beta[k] + (j == k ? model.kappa : 0.0);
      long m = 0;
      for (long i = 0; i < n; ++i) {
        if (unif(rng) < a / (static_cast<double>(i) + a)) ++m;
      }
      if (j == k && model.kappa > 0.0 && m > 0) {
        // Remove tables attributable to the sticky bias.
        const double p = rho / (rho + model.beta[j] * (1.0 - rho));
        std::binomial_distribution<long> override_draw(m, p);
        m -= override_draw(rng);
      }
      tables[k] += static_cast<double>(m);
    }
  }
  std::vector<double> conc(l);
  for (std::size_t k = 0; k < l; ++k) conc[k] = model.gamma / static_cast<double>(l) + tables[k];
  model.beta = sample_dirichlet(conc, rng);

  for (std::size_t j = 0; j < l; ++j) {
    for (std::size_t k = 0; k < l; ++k) {
      conc[k] = model.alpha * model.beta[k] + counts[j * l + k] + (j == k ? model.kappa : 0.0);
    }
    const auto row = sample_dirichlet(conc, rng);
    std::copy(row.begin(), row.end(), model.transition.begin() + static_cast<std::ptrdiff_t>(j * l));
  }

  std::vector<RegressionStats> stats(l, RegressionStats(model.order));
  for (std::size_t t = r; t < data.size(); ++t) {
    stats[static_cast<std::size_t>(z[t])].add(data.subspan(t - r, r), data[t], model.prior.center);
  }
  for (std::size_t k = 0; k < l; ++k) model.states[k] = sample_emission(model.prior, stats[k], rng);
}

StateSequence gibbs_sweep(SwitchingArModel& model, std::span<const double> data, Rng& rng) {
  StateSequence out;
  out.indicators = sample_states(model, data, rng);
  resample_parameters(model, data, out.indicators, rng);
  return out;
}

SwitchingArModel initialize_model(std::span<const double> data, const HdpArConfig& config, Rng& rng) {
  config.validate();
  SwitchingArModel model;
  model.order = config.order;
  model.truncation = config.truncation;
  model.alpha = config.alpha;
  model.gamma = config.gamma;
  model.kappa = config.kappa;
  model.seed = config.seed;
  model.prior = EmissionPrior::from_data(data);
  const auto l = static_cast<std::size_t>(config.truncation);
  model.beta.assign(l, 1.0 / static_cast<double>(l));
  model.transition.assign(l * l, 1.0 / static_cast<double>(l));
  model.states.assign(l, ArState{std::vector<double>(static_cast<std::size_t>(config.order), 0.0), 0.0, 1.0});
  // Contiguous chunks dealt out to the states in turn. Each state starts from
  // a local fit, so the sampler mostly has to merge states, which Gibbs
  // moves do well, rather than split them, which they do poorly.
  const std::size_t chunk = std::max<std::size_t>(20 * static_cast<std::size_t>(config.order + 1),
                                                  (data.size() + l - 1) / l);
  std::vector<int> z(data.size());
  for (std::size_t t = 0; t < data.size(); ++t) z[t] = static_cast<int>((t / chunk) % l);
  resample_parameters(model, data, z, rng);
  return model;
}

int HdpArFit::occupied_mode(int burn_in) const {
  std::map<int, int> freq;
  for (std::size_t i = static_cast<std::size_t>(burn_in); i < occupied_trace.size(); ++i) ++freq[occupied_trace[i]];
  int best = 0, count = 0;
  for (const auto& [k, c] : freq) {
    if (c > count) {
      best = k;
      count = c;
    }
  }
  return best;
}

HdpArFit fit_hdp_ar(const ScalarSeries& data, const HdpArConfig& config) {
  config.validate();
  const std::span<const double> x(data.values);
  if (x.size() < static_cast<std::size_t>(std::max(50 * config.order, 2))) {
    throw Error(ErrorCode::TooShort, "need at least 50 * order points, got " + std::to_string(x.size()));
  }
  Rng rng = make_rng(config.seed, "hdp-ar-gibbs");
  SwitchingArModel model = initialize_model(x, config, rng);

  HdpArFit fit;
  fit.model = model;
  fit.states.indicators.assign(x.size(), 0);
  fit.best_loglik = complete_data_loglik(model, x, fit.states.indicators);

  const auto l = static_cast<std::size_t>(config.truncation);
  std::vector<double> freq;
  bool have_best = false;
  for (int sweep = 0; sweep < config.sweeps; ++sweep) {
    StateSequence z = gibbs_sweep(model, x, rng);
    // Score the sampled labelling against the parameters it was drawn with
    // after they have been refreshed, so the pair is a coherent sample.
    const double ll = complete_data_loglik(model, x, z.indicators);
    fit.loglik_trace.push_back(ll);
    fit.occupied_trace.push_back(z.occupied());
    if (sweep < config.burn_in) continue;
    if (freq.empty()) freq.assign(x.size() * l, 0.0);
    for (std::size_t t = 0; t < x.size(); ++t) freq[t * l + static_cast<std::size_t>(z.indicators[t])] += 1.0;
    if (!have_best || ll > fit.best_loglik) {
      have_best = true;
      fit.best_loglik = ll;
      fit.model = model;
      fit.states.indicators = z.indicators;
    }
  }
  if (!freq.empty()) {
    const double kept = static_cast<double>(config.sweeps - config.burn_in);
    fit.states.posteriors.assign(x.size(), std::vector<double>(l));
    for (std::size_t t = 0; t < x.size(); ++t) {
      for (std::size_t k = 0; k < l; ++k) fit.states.posteriors[t][k] = freq[t * l + k] / kept;
    }
  }
  return fit;
}

ConcentrationChoice tune_concentrations(const ScalarSeries& data, const HdpArConfig& base,
                                        std::span<const double> alphas, std::span<const double> gammas) {
  ConcentrationChoice best;
  best.loglik = -std::numeric_limits<double>::infinity();
  for (double a : alphas) {
    for (double g : gammas) {
      HdpArConfig cfg = base;
      cfg.alpha = a;
      cfg.gamma = g;
      const HdpArFit fit = fit_hdp_ar(data, cfg);
      if (fit.best_loglik > best.loglik) best = {a, g, fit.best_loglik};
    }
  }
  return best;
}

}  // namespace qcseg
