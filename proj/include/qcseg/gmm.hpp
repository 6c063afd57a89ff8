#pragma once

#include <cstdint>
#include <vector>

#include "qcseg/types.hpp"

namespace qcseg {

/// One-dimensional Gaussian mixture.
struct GmmParams {
  std::vector<double> means;
  std::vector<double> variances;
  std::vector<double> weights;

  int components() const { return static_cast<int>(means.size()); }
  /// log pi_k + log N(x | mu_k, sigma_k^2)
  double joint_log_density(int k, double x) const;
};

struct GmmOptions {
  int components = 2;
  std::uint64_t seed = 0;
  double tolerance = 1e-8;  // relative log-likelihood change
  int max_iterations = 1000;
  int restarts = 5;
};

struct GmmFit {
  GmmParams params;
  // Row-major T x K posterior component probabilities.
  std::vector<double> responsibilities;
  // Log-likelihood after every E-M iteration of the winning restart.
  std::vector<double> loglik_trace;
  double loglik = 0.0;
  bool converged = false;
};

GmmFit fit_gmm_em(const ScalarSeries& data, const GmmOptions& options = {});

/// Mixture log-likelihood of the data.
double gmm_loglik(const GmmParams& params, const std::vector<double>& x);

/// MAP component per point; ties go to the lower index.
StateSequence map_assign(const GmmParams& params, const ScalarSeries& data);

struct MedianSmoothResult {
  StateSequence states;
  int passes = 0;  // passes that changed something
};

/// Moving median with edge replication, repeated until a pass changes nothing
/// (at most `max_passes`). `window` must be odd and >= 3.
MedianSmoothResult median_smooth_to_convergence(const StateSequence& indicators, int window,
                                                int max_passes = 100);

/// Orients a two-component fit: for walking and voice tests the larger-mean
/// component is adherence; for balance tests it is violation.
AdherenceLabels mean_rule_adherence(const GmmParams& params, const StateSequence& smoothed,
                                    TestKind kind);

/// Two seconds at `rate`, rounded up to the next odd count (at least 3).
int default_median_window(double rate, double seconds = 2.0);

struct GmmSegmentation {
  GmmFit fit;
  StateSequence raw;
  StateSequence smoothed;
  AdherenceLabels labels;
};

/// Fit, MAP-assign, smooth and orient in one call.
GmmSegmentation segment_gmm(const ScalarSeries& data, TestKind kind, int window,
                            const GmmOptions& options = {});

}  // namespace qcseg
