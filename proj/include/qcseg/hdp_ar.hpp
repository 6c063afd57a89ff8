#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "qcseg/rng.hpp"
#include "qcseg/types.hpp"

namespace qcseg {

/// One autoregressive regime: x_t = mean + sum_j A_j x_{t-j} + e_t,
/// e_t ~ N(0, variance).
struct ArState {
  std::vector<double> coefficients;  // A_1..A_r
  double mean = 0.0;
  double variance = 1.0;

  int order() const { return static_cast<int>(coefficients.size()); }
};

/// Gaussian log-density of `x` given the preceding `window` values, oldest
/// first (window.back() is x_{t-1}). Throws WrongWindowLength unless
/// window.size() equals the state's order.
double ar_loglik(const ArState& state, std::span<const double> window, double x);

/// Closed-form spectral density sigma^2 / |1 - sum_j A_j exp(-i 2 pi f j)|^2
/// on a grid of normalized frequencies (cycles/sample, in [0, 1/2)).
SpectrumEstimate ar_psd(const ArState& state, std::span<const double> normalized_freqs);

/// Conjugate normal-inverse-gamma prior on (A, c | sigma^2) and sigma^2 for
/// the regression of (x_t - center) on (x_{t-1} - center, ..., x_{t-r} - center, 1).
/// The regression intercept c maps back to the state mean as
/// mean = center * (1 - sum A) + c.
struct EmissionPrior {
  double center = 0.0;
  double coef_variance = 1.0;       // prior variance of each A_j, per unit sigma^2
  double intercept_variance = 1.0;  // prior variance of c, per unit sigma^2
  double shape = 2.0;               // inverse-gamma a0
  double scale = 0.5;               // inverse-gamma b0

  /// Weakly informative prior scaled to the data: unit-scale coefficients in
  /// standardized units, noise variance centred near half the data variance.
  static EmissionPrior from_data(std::span<const double> x);
};

/// Sufficient statistics of the regression form for one state.
struct RegressionStats {
  int order = 0;
  std::size_t count = 0;
  std::vector<double> gram;  // (r+1)^2, row-major H^T H
  std::vector<double> cross; // H^T y
  double yy = 0.0;

  explicit RegressionStats(int order_);
  void add(std::span<const double> window, double x, double center);
};

/// Closed-form posterior of the conjugate regression.
struct EmissionPosterior {
  std::vector<double> mean;        // m_n, length r+1 (A_1..A_r, intercept)
  std::vector<double> covariance;  // Lambda_n^{-1}, row-major; scaled by sigma^2
  double shape = 0.0;
  double scale = 0.0;
};

EmissionPosterior emission_posterior(const EmissionPrior& prior, const RegressionStats& stats);

/// Draws (A, mean, sigma^2) from the conjugate posterior (the prior when stats
/// are empty).
ArState sample_emission(const EmissionPrior& prior, const RegressionStats& stats, Rng& rng);

struct HdpArConfig {
  int order = 4;
  int truncation = 20;
  double alpha = 1.0;  // local concentration
  double gamma = 1.0;  // global concentration
  double kappa = 0.0;  // sticky self-transition bias
  int sweeps = 500;
  int burn_in = 250;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Weak-limit HDP switching AR model.
struct SwitchingArModel {
  int order = 4;
  int truncation = 20;
  std::vector<ArState> states;          // length L
  std::vector<double> transition;       // L x L, row-major, rows on the simplex
  std::vector<double> beta;             // global weights, simplex over L
  double alpha = 1.0;
  double gamma = 1.0;
  double kappa = 0.0;
  EmissionPrior prior;
  std::uint64_t seed = 0;

  double pi(int from, int to) const { return transition[static_cast<std::size_t>(from) * truncation + to]; }
  void validate() const;
};

/// log p(x, z | model): transition terms for t > r plus emission terms for
/// t >= r. The first r points are conditioned on. The initial state carries
/// a flat weight, so it contributes no term.
double complete_data_loglik(const SwitchingArModel& model, std::span<const double> data,
                            std::span<const int> z);

/// Emission log-likelihood matrix, row t - r for t = r..T-1, L columns.
std::vector<double> emission_loglik_matrix(const SwitchingArModel& model, std::span<const double> data);

/// Joint draw of z_r..z_{T-1} by backward filtering / forward sampling with
/// a uniform initial distribution. Indices t < r copy z_r.
std::vector<int> sample_states(const SwitchingArModel& model, std::span<const double> data, Rng& rng);

struct SimulatedPath {
  ScalarSeries series;
  StateSequence truth;
};

/// Draws z from the Markov chain (z_0 from beta), then x by each state's AR
/// recursion. Lags before the start take the state's stationary mean.
SimulatedPath simulate(const SwitchingArModel& model, std::size_t length, std::uint64_t seed,
                       double rate = 1.0);

/// AR recursion along a fixed state path.
std::vector<double> simulate_along(std::span<const ArState> states, std::span<const int> z, Rng& rng);

/// One blocked sweep: z jointly, then auxiliary tables and beta, then the
/// transition rows, then every state's emission parameters.
StateSequence gibbs_sweep(SwitchingArModel& model, std::span<const double> data, Rng& rng);

/// Resamples beta, the transition rows and emissions given z (steps after
/// the state draw in `gibbs_sweep`).
void resample_parameters(SwitchingArModel& model, std::span<const double> data, std::span<const int> z,
                         Rng& rng);

/// Starting model: the series is cut into contiguous chunks assigned to the
/// L states round-robin, then parameters are drawn given that assignment.
SwitchingArModel initialize_model(std::span<const double> data, const HdpArConfig& config, Rng& rng);

struct HdpArFit {
  SwitchingArModel model;           // best post-burn-in sample
  StateSequence states;             // its indicators + empirical posteriors
  std::vector<double> loglik_trace; // complete-data log-likelihood per sweep
  std::vector<int> occupied_trace;  // K+ per sweep
  double best_loglik = 0.0;

  /// Most frequent K+ over post-burn-in sweeps (0 when there are none).
  int occupied_mode(int burn_in) const;
};

HdpArFit fit_hdp_ar(const ScalarSeries& data, const HdpArConfig& config);

struct ConcentrationChoice {
  double alpha = 1.0;
  double gamma = 1.0;
  double loglik = 0.0;
};

/// Grid search over (alpha, gamma) by best complete-data log-likelihood.
ConcentrationChoice tune_concentrations(const ScalarSeries& data, const HdpArConfig& base,
                                        std::span<const double> alphas, std::span<const double> gammas);

}  // namespace qcseg
