#pragma once

#include <optional>
#include <vector>

#include "qcseg/types.hpp"

namespace qcseg {

enum class FidelityMode {
  Squared,   // 1/2 sum (x - g)^2, the standard L1 trend filter
  Absolute,  // 1/2 sum |x - g|
};

struct TrendFilterConfig {
  // Regularization weight on the L1 norm of second differences. Unset means
  // the per-series default from `default_lambda`.
  std::optional<double> lambda;
  int max_iterations = 20000;
  double tolerance = 1e-10;  // relative objective change
  FidelityMode fidelity = FidelityMode::Squared;

  void validate() const;
};

/// 50 * T / 1000 * stddev(x); tuned on synthetic drift fixtures.
double default_lambda(const std::vector<double>& x);

struct TrendFilterResult {
  ScalarSeries trend;
  bool converged = false;
  int iterations = 0;
  double lambda = 0.0;
  // Objective of the reported iterate after each solver iteration. The
  // reported iterate is the best point seen so far, so this never increases.
  std::vector<double> objective_trace;
};

/// Objective value for a candidate trend.
double trend_objective(const std::vector<double>& x, const std::vector<double>& g, double lambda,
                       FidelityMode fidelity);

/// Piecewise-linear trend. Squared fidelity is solved by a primal-dual
/// interior-point method on the dual box QP (banded Newton steps), then
/// polished exactly on the recovered kink pattern. Absolute fidelity uses
/// ADMM on the second-difference operator.
/// Throws TooShort for fewer than 3 samples. Non-convergence is reported via
/// `converged == false` with the best iterate returned.
TrendFilterResult l1_trend_filter(const ScalarSeries& input, const TrendFilterConfig& config);

struct GravityDecomposition {
  TriaxialSeries trend;    // gravitational estimate
  TriaxialSeries dynamic;  // input - trend
  bool converged = true;
};

/// Filters each axis independently; dynamic = input - trend.
GravityDecomposition remove_gravity(const TriaxialSeries& input, const TrendFilterConfig& config);

}  // namespace qcseg
