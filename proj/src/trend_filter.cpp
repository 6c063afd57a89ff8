#include "qcseg/trend_filter.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>

#include "qcseg/error.hpp"

namespace qcseg {

namespace {

using Vec = std::vector<double>;

// (D g)_i = g_i - 2 g_{i+1} + g_{i+2}, i = 0..T-3
void second_diff(const Vec& g, Vec& out) {
  out.resize(g.size() - 2);
  for (std::size_t i = 0; i + 2 < g.size(); ++i) out[i] = g[i] - 2.0 * g[i + 1] + g[i + 2];
}

// out = D^T v, length T
void second_diff_adjoint(const Vec& v, Vec& out) {
  const std::size_t n = v.size() + 2;
  out.assign(n, 0.0);
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] += v[i];
    out[i + 1] -= 2.0 * v[i];
    out[i + 2] += v[i];
  }
}

double soft(double v, double k) {
  if (v > k) return v - k;
  if (v < -k) return v + k;
  return 0.0;
}

double norm2(const Vec& v) {
  return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
}

// Cholesky factor of a symmetric positive definite pentadiagonal matrix
// given by its diagonal and its first and second sub-diagonals.
class PentadiagonalSolver {
 public:
  PentadiagonalSolver(const Vec& diag, const Vec& off1, const Vec& off2)
      : n_(diag.size()), d_(n_), l1_(n_, 0.0), l2_(n_, 0.0) {
    // l1_[j] = L(j, j-1), l2_[j] = L(j, j-2), d_[j] = L(j, j)
    for (std::size_t j = 0; j < n_; ++j) {
      const double ljm2 = j >= 2 ? off2[j - 2] / d_[j - 2] : 0.0;
      double ljm1 = 0.0;
      if (j >= 1) ljm1 = (off1[j - 1] - (j >= 2 ? ljm2 * l1_[j - 1] : 0.0)) / d_[j - 1];
      const double s = diag[j] - ljm1 * ljm1 - ljm2 * ljm2;
      if (!(s > 0.0)) throw Error(ErrorCode::NoConvergence, "banded system lost positive definiteness");
      d_[j] = std::sqrt(s);
      l1_[j] = ljm1;
      l2_[j] = ljm2;
    }
  }

  // I + rho * D^T D, the fixed matrix of the ADMM g-update.
  static PentadiagonalSolver identity_plus_dtd(std::size_t n, double rho) {
    Vec diag(n, 1.0), off1(n, 0.0), off2(n, 0.0);
    for (std::size_t i = 0; i + 2 < n; ++i) {
      diag[i] += rho;
      diag[i + 1] += 4.0 * rho;
      diag[i + 2] += rho;
      off1[i] -= 2.0 * rho;
      off1[i + 1] -= 2.0 * rho;
      off2[i] += rho;
    }
    return PentadiagonalSolver(diag, off1, off2);
  }

  void solve(Vec& b) const {
    for (std::size_t j = 0; j < n_; ++j) {
      double s = b[j];
      if (j >= 1) s -= l1_[j] * b[j - 1];
      if (j >= 2) s -= l2_[j] * b[j - 2];
      b[j] = s / d_[j];
    }
    for (std::size_t jj = n_; jj-- > 0;) {
      double s = b[jj];
      if (jj + 1 < n_) s -= l1_[jj + 1] * b[jj + 1];
      if (jj + 2 < n_) s -= l2_[jj + 2] * b[jj + 2];
      b[jj] = s / d_[jj];
    }
  }

 private:
  std::size_t n_;
  Vec d_, l1_, l2_;
};

// out = D D^T v for v of length T-2.
void ddt_apply(const Vec& v, Vec& scratch, Vec& out) {
  second_diff_adjoint(v, scratch);
  second_diff(scratch, out);
}

// Solves the squared-fidelity problem restricted to the kink pattern in
// `kinks` (sign per second difference, 0 where the trend must be straight).
// The minimizer is a linear spline with knots at the kinks.
std::optional<Vec> polish_on_support(const Vec& x, const std::vector<int>& kinks, double lambda) {
  const std::size_t n = x.size();
  std::vector<std::size_t> knots{0};
  std::vector<int> signs{0};
  for (std::size_t i = 0; i < kinks.size(); ++i) {
    if (kinks[i] != 0) {
      knots.push_back(i + 1);
      signs.push_back(kinks[i]);
    }
  }
  knots.push_back(n - 1);
  signs.push_back(0);
  const auto m = static_cast<Eigen::Index>(knots.size());

  std::vector<Eigen::Triplet<double>> gram;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m);
  for (Eigen::Index j = 0; j + 1 < m; ++j) {
    const std::size_t a = knots[static_cast<std::size_t>(j)];
    const std::size_t b = knots[static_cast<std::size_t>(j + 1)];
    const double h = static_cast<double>(b - a);
    // Points strictly after a up to and including b (the first knot is added once).
    const std::size_t from = j == 0 ? a : a + 1;
    for (std::size_t t = from; t <= b; ++t) {
      const double w = static_cast<double>(t - a) / h;  // weight on knot j+1
      const double v = 1.0 - w;
      gram.emplace_back(j, j, v * v);
      gram.emplace_back(j, j + 1, v * w);
      gram.emplace_back(j + 1, j, v * w);
      gram.emplace_back(j + 1, j + 1, w * w);
      rhs(j) += v * x[t];
      rhs(j + 1) += w * x[t];
    }
  }
  for (Eigen::Index j = 1; j + 1 < m; ++j) {
    const double s = signs[static_cast<std::size_t>(j)];
    const double hl = static_cast<double>(knots[j] - knots[j - 1]);
    const double hr = static_cast<double>(knots[j + 1] - knots[j]);
    // d/dc of slope change at knot j
    rhs(j - 1) -= lambda * s / hl;
    rhs(j) -= lambda * s * (-1.0 / hr - 1.0 / hl);
    rhs(j + 1) -= lambda * s / hr;
  }
  Eigen::SparseMatrix<double> a(m, m);
  a.setFromTriplets(gram.begin(), gram.end());
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(a);
  if (ldlt.info() != Eigen::Success) return std::nullopt;
  const Eigen::VectorXd c = ldlt.solve(rhs);
  if (ldlt.info() != Eigen::Success || !c.allFinite()) return std::nullopt;

  Vec g(n);
  for (std::size_t j = 0; j + 1 < knots.size(); ++j) {
    const std::size_t a0 = knots[j], b0 = knots[j + 1];
    const double h = static_cast<double>(b0 - a0);
    for (std::size_t t = a0; t <= b0; ++t) {
      const double w = static_cast<double>(t - a0) / h;
      g[t] = (1.0 - w) * c(static_cast<Eigen::Index>(j)) + w * c(static_cast<Eigen::Index>(j + 1));
    }
  }
  return g;
}

struct Solution {
  Vec g;
  bool converged = false;
  int iterations = 0;
  double rho = 1.0;
  Vec trace;
};

// Primal-dual interior point method on the dual box QP
//   min_v 1/2 v^T D D^T v - v^T D x  subject to |v_i| <= lambda,
// with primal trend g = x - D^T v. Each Newton step is one pentadiagonal solve.
Solution solve_squared(const Vec& x, double lambda, const TrendFilterConfig& cfg) {
  constexpr double kAlpha = 0.01, kBeta = 0.5, kMu = 2.0;
  constexpr int kMaxLineSearch = 40;
  constexpr double kStallTolerance = 1e-7;
  const std::size_t n = x.size(), m = n - 2;
  Solution out;

  Vec dx;
  second_diff(x, dx);
  Vec v(m, 0.0), mu1(m, 1.0), mu2(m, 1.0), f1(m), f2(m);
  for (std::size_t i = 0; i < m; ++i) {
    f1[i] = v[i] - lambda;
    f2[i] = -v[i] - lambda;
  }
  // D D^T has constant bands (6, -4, 1).
  Vec dtv, ddtv, scratch, g(n), dv(m), dmu1(m), dmu2(m), diag(m), off1(m, -4.0), off2(m, 1.0), r(m);
  Vec nv(m), nmu1(m), nmu2(m), nf1(m), nf2(m), nddtv;

  Vec best = x;
  double best_obj = trend_objective(x, x, lambda, FidelityMode::Squared);
  double t = 1e-10, step = std::numeric_limits<double>::infinity();
  double min_gap = std::numeric_limits<double>::infinity();
  int stalled = 0;

  auto residual_norm = [&](const Vec& ddt, const Vec& a, const Vec& b, const Vec& fa,
                           const Vec& fb, double tt) {
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double rd = ddt[i] - dx[i] + a[i] - b[i];
      const double c1 = -a[i] * fa[i] - 1.0 / tt;
      const double c2 = -b[i] * fb[i] - 1.0 / tt;
      s += rd * rd + c1 * c1 + c2 * c2;
    }
    return std::sqrt(s);
  };

  for (int it = 1; it <= cfg.max_iterations; ++it) {
    second_diff_adjoint(v, dtv);
    second_diff(dtv, ddtv);
    for (std::size_t k = 0; k < n; ++k) g[k] = x[k] - dtv[k];
    const double pobj = trend_objective(x, g, lambda, FidelityMode::Squared);
    if (pobj < best_obj) {
      best_obj = pobj;
      best = g;
    }
    out.trace.push_back(best_obj);
    out.iterations = it;

    double dobj = 0.0;
    for (std::size_t i = 0; i < m; ++i) dobj += dx[i] * v[i];
    dobj -= 0.5 * std::inner_product(dtv.begin(), dtv.end(), dtv.begin(), 0.0);
    const double gap = pobj - dobj;
    const double scale = std::max(1.0, std::abs(pobj));
    if (gap <= cfg.tolerance * scale) {
      out.converged = true;
      break;
    }
    // On long inputs rounding puts a floor under the computable gap; stop
    // once it stops shrinking and leave the last digits to the polish step.
    if (gap < 0.9 * min_gap) {
      min_gap = gap;
      stalled = 0;
    } else if (++stalled >= 20) {
      out.converged = min_gap <= kStallTolerance * scale;
      break;
    }

    if (step >= 0.2) t = std::max(2.0 * static_cast<double>(m) * kMu / gap, 1.2 * t);
    for (std::size_t i = 0; i < m; ++i) {
      diag[i] = 6.0 - (mu1[i] / f1[i] + mu2[i] / f2[i]);
      r[i] = -ddtv[i] + dx[i] + (1.0 / t) / f1[i] - (1.0 / t) / f2[i];
    }
    dv = r;
    PentadiagonalSolver(diag, off1, off2).solve(dv);
    for (std::size_t i = 0; i < m; ++i) {
      dmu1[i] = -(mu1[i] + ((1.0 / t) + dv[i] * mu1[i]) / f1[i]);
      dmu2[i] = -(mu2[i] + ((1.0 / t) - dv[i] * mu2[i]) / f2[i]);
    }
    const double res0 = residual_norm(ddtv, mu1, mu2, f1, f2, t);

    step = 1.0;
    for (std::size_t i = 0; i < m; ++i) {
      if (dmu1[i] < 0.0) step = std::min(step, -0.99 * mu1[i] / dmu1[i]);
      if (dmu2[i] < 0.0) step = std::min(step, -0.99 * mu2[i] / dmu2[i]);
    }
    for (int ls = 0; ls < kMaxLineSearch; ++ls) {
      bool feasible = true;
      for (std::size_t i = 0; i < m; ++i) {
        nv[i] = v[i] + step * dv[i];
        nmu1[i] = mu1[i] + step * dmu1[i];
        nmu2[i] = mu2[i] + step * dmu2[i];
        nf1[i] = nv[i] - lambda;
        nf2[i] = -nv[i] - lambda;
        feasible = feasible && nf1[i] < 0.0 && nf2[i] < 0.0;
      }
      if (feasible) {
        ddt_apply(nv, scratch, nddtv);
        if (residual_norm(nddtv, nmu1, nmu2, nf1, nf2, t) <= (1.0 - kAlpha * step) * res0) break;
      }
      step *= kBeta;
    }
    v.swap(nv);
    mu1.swap(nmu1);
    mu2.swap(nmu2);
    f1.swap(nf1);
    f2.swap(nf2);
  }

  // Exact solve on the kink pattern of the best iterate.
  Vec dg;
  second_diff(best, dg);
  double dscale = 0.0;
  for (double d : dg) dscale = std::max(dscale, std::abs(d));
  for (const double thresh : {1e-6, 1e-9}) {
    std::vector<int> kinks(m, 0);
    for (std::size_t i = 0; i < m; ++i) {
      if (std::abs(dg[i]) > thresh * dscale) kinks[i] = (dg[i] > 0) - (dg[i] < 0);
    }
    if (auto polished = polish_on_support(x, kinks, lambda)) {
      const double obj = trend_objective(x, *polished, lambda, FidelityMode::Squared);
      if (obj <= best_obj) {
        best_obj = obj;
        best = std::move(*polished);
        out.trace.push_back(best_obj);
      }
    }
  }
  out.g = std::move(best);
  return out;
}

// The absolute-fidelity problem is a linear program, so its optimum sits at
// a vertex where T of the conditions g_t = x_t and (Dg)_i = 0 hold. ADMM
// approaches it slowly; solving those conditions exactly for the ones the
// iterate nearly satisfies lands on the vertex when the guess is right.
std::optional<Vec> polish_vertex(const Vec& x, const Vec& g, double tau) {
  const std::size_t n = x.size();
  Vec dg;
  second_diff(g, dg);
  std::vector<Eigen::Triplet<double>> entries;
  std::vector<double> rhs;
  Eigen::Index row = 0;
  for (std::size_t t = 0; t < n; ++t) {
    if (std::abs(x[t] - g[t]) <= tau) {
      entries.emplace_back(row++, static_cast<Eigen::Index>(t), 1.0);
      rhs.push_back(x[t]);
    }
  }
  for (std::size_t i = 0; i < dg.size(); ++i) {
    if (std::abs(dg[i]) <= tau) {
      const auto c = static_cast<Eigen::Index>(i);
      entries.emplace_back(row, c, 1.0);
      entries.emplace_back(row, c + 1, -2.0);
      entries.emplace_back(row++, c + 2, 1.0);
      rhs.push_back(0.0);
    }
  }
  if (static_cast<std::size_t>(row) < n) return std::nullopt;
  Eigen::SparseMatrix<double> m(row, static_cast<Eigen::Index>(n));
  m.setFromTriplets(entries.begin(), entries.end());
  const Eigen::SparseMatrix<double> normal = m.transpose() * m;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(normal);
  if (ldlt.info() != Eigen::Success) return std::nullopt;
  const Eigen::VectorXd b = m.transpose() * Eigen::Map<const Eigen::VectorXd>(rhs.data(), row);
  const Eigen::VectorXd sol = ldlt.solve(b);
  if (ldlt.info() != Eigen::Success || !sol.allFinite()) return std::nullopt;
  return Vec(sol.data(), sol.data() + sol.size());
}

Solution solve_absolute(const Vec& x, double lambda, const TrendFilterConfig& cfg, double rho) {
  const std::size_t n = x.size();
  Solution out;
  // The g-update matrix is I + D^T D regardless of rho.
  const auto solver = PentadiagonalSolver::identity_plus_dtd(n, 1.0);
  Vec g = x, y1 = x, y2, u1(n, 0.0), u2(n - 2, 0.0), dg, rhs, tmp(n - 2), y1_old, y2_old;
  second_diff(g, y2);

  Vec best = g;
  double best_obj = trend_objective(x, g, lambda, FidelityMode::Absolute);
  double prev_obj = std::numeric_limits<double>::infinity();
  const double scale = std::max(1.0, norm2(x));

  for (int it = 1; it <= cfg.max_iterations; ++it) {
    for (std::size_t i = 0; i < tmp.size(); ++i) tmp[i] = y2[i] - u2[i];
    second_diff_adjoint(tmp, rhs);
    for (std::size_t t = 0; t < n; ++t) rhs[t] += y1[t] - u1[t];
    solver.solve(rhs);
    g.swap(rhs);
    second_diff(g, dg);

    y1_old = y1;
    y2_old = y2;
    double r = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      const double v = g[t] + u1[t];
      y1[t] = x[t] + soft(v - x[t], 0.5 / rho);
      u1[t] += g[t] - y1[t];
      r += (g[t] - y1[t]) * (g[t] - y1[t]);
    }
    for (std::size_t i = 0; i < dg.size(); ++i) {
      y2[i] = soft(dg[i] + u2[i], lambda / rho);
      u2[i] += dg[i] - y2[i];
      r += (dg[i] - y2[i]) * (dg[i] - y2[i]);
    }
    r = std::sqrt(r);
    for (std::size_t i = 0; i < tmp.size(); ++i) tmp[i] = y2[i] - y2_old[i];
    second_diff_adjoint(tmp, rhs);
    for (std::size_t t = 0; t < n; ++t) rhs[t] += y1[t] - y1_old[t];
    const double sdiff = rho * norm2(rhs);

    const double obj = trend_objective(x, g, lambda, FidelityMode::Absolute);
    if (obj < best_obj) {
      best_obj = obj;
      best = g;
    }
    out.trace.push_back(best_obj);
    out.iterations = it;

    const double rel = std::abs(prev_obj - obj) / std::max(1.0, std::abs(obj));
    prev_obj = obj;
    const double res_tol = std::sqrt(cfg.tolerance) * scale;
    if (rel < cfg.tolerance && r < res_tol && sdiff < res_tol) {
      out.converged = true;
      break;
    }
    if (it % 25 == 0) {
      double factor = 1.0;
      if (r > 10.0 * sdiff) factor = 2.0;
      else if (sdiff > 10.0 * r) factor = 0.5;
      if (factor != 1.0) {
        rho *= factor;
        for (double& v : u1) v /= factor;
        for (double& v : u2) v /= factor;
      }
    }
  }
  const double span = std::max(1.0, std::abs(*std::max_element(x.begin(), x.end(), [](double a, double b) {
    return std::abs(a) < std::abs(b);
  })));
  const Vec start = best;
  for (double rel = 1e-2; rel >= 1e-10; rel *= 0.1) {
    if (auto polished = polish_vertex(x, start, rel * span)) {
      const double obj = trend_objective(x, *polished, lambda, FidelityMode::Absolute);
      if (obj < best_obj) {
        best_obj = obj;
        best = std::move(*polished);
        out.trace.push_back(best_obj);
      }
    }
  }
  out.g = std::move(best);
  out.rho = rho;
  return out;
}

TrendFilterResult filter_values(const ScalarSeries& input, const TrendFilterConfig& config,
                                double& rho_hint) {
  config.validate();
  const Vec& x = input.values;
  if (x.size() < 3) {
    throw Error(ErrorCode::TooShort,
                "trend filter needs at least 3 samples, got " + std::to_string(x.size()));
  }
  for (double v : x) {
    if (!std::isfinite(v)) throw Error(ErrorCode::InvalidArgument, "non-finite sample");
  }
  const double lambda = config.lambda.value_or(default_lambda(x));

  TrendFilterResult result;
  result.lambda = lambda;
  result.trend = ScalarSeries{input.rate, x, input.unit};
  if (lambda == 0.0) {
    result.converged = true;
    result.objective_trace.push_back(0.0);
    return result;
  }
  // Shift by the least-squares line; the problem is invariant to affine
  // offsets and the residual is better scaled for the solver.
  const std::size_t n = x.size();
  double tm = 0.5 * static_cast<double>(n - 1), xm = 0.0;
  for (double v : x) xm += v;
  xm /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    sxy += (static_cast<double>(t) - tm) * (x[t] - xm);
    sxx += (static_cast<double>(t) - tm) * (static_cast<double>(t) - tm);
  }
  const double slope = sxy / sxx;
  const double icpt = xm - slope * tm;
  Vec resid(n);
  for (std::size_t t = 0; t < n; ++t) resid[t] = x[t] - (icpt + slope * static_cast<double>(t));

  const double rho = rho_hint > 0.0 ? rho_hint : std::max(lambda, 1e-6);
  Solution sol = config.fidelity == FidelityMode::Squared ? solve_squared(resid, lambda, config)
                                                          : solve_absolute(resid, lambda, config, rho);
  rho_hint = sol.rho;
  for (std::size_t t = 0; t < n; ++t) sol.g[t] += icpt + slope * static_cast<double>(t);
  result.trend.values = std::move(sol.g);
  result.converged = sol.converged;
  result.iterations = sol.iterations;
  result.objective_trace = std::move(sol.trace);
  return result;
}

}  // namespace

void TrendFilterConfig::validate() const {
  if (lambda && !(*lambda >= 0.0 && std::isfinite(*lambda))) {
    throw Error(ErrorCode::InvalidArgument, "lambda must be finite and >= 0");
  }
  if (max_iterations < 1) throw Error(ErrorCode::InvalidArgument, "max_iterations must be >= 1");
  if (!(tolerance > 0.0)) throw Error(ErrorCode::InvalidArgument, "tolerance must be > 0");
}

double default_lambda(const std::vector<double>& x) {
  if (x.empty()) return 0.0;
  const double n = static_cast<double>(x.size());
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  return 50.0 * n / 1000.0 * std::sqrt(var / n);
}

double trend_objective(const std::vector<double>& x, const std::vector<double>& g, double lambda,
                       FidelityMode fidelity) {
  double fit = 0.0;
  for (std::size_t t = 0; t < x.size(); ++t) {
    const double r = x[t] - g[t];
    fit += fidelity == FidelityMode::Squared ? r * r : std::abs(r);
  }
  double pen = 0.0;
  for (std::size_t t = 0; t + 2 < g.size(); ++t) pen += std::abs(g[t] - 2.0 * g[t + 1] + g[t + 2]);
  return 0.5 * fit + lambda * pen;
}

TrendFilterResult l1_trend_filter(const ScalarSeries& input, const TrendFilterConfig& config) {
  double rho = 0.0;
  return filter_values(input, config, rho);
}

GravityDecomposition remove_gravity(const TriaxialSeries& input, const TrendFilterConfig& config) {
  if (input.size() < 3) {
    throw Error(ErrorCode::TooShort,
                "gravity removal needs at least 3 samples, got " + std::to_string(input.size()));
  }
  GravityDecomposition out;
  out.trend.rate = out.dynamic.rate = input.rate;
  out.trend.samples.resize(input.size());
  out.dynamic.samples.resize(input.size());
  double rho = 0.0;  // carried across axes as a warm start
  for (int axis = 0; axis < 3; ++axis) {
    ScalarSeries column{input.rate, {}, ScalarUnit::Raw};
    column.values.reserve(input.size());
    for (const auto& s : input.samples) column.values.push_back(s[axis]);
    const auto res = filter_values(column, config, rho);
    out.converged = out.converged && res.converged;
    for (std::size_t t = 0; t < input.size(); ++t) {
      out.trend.samples[t][axis] = res.trend.values[t];
      out.dynamic.samples[t][axis] = input.samples[t][axis] - res.trend.values[t];
    }
  }
  return out;
}

}  // namespace qcseg
