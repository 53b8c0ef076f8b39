#pragma once

// Granger-causality statistics.
//
// For a full fit (all column blocks) and a reduced fit (source block removed)
// solved with the same penalty:
//
//   T = l(reduced) / l(full) - 1        LASSO-based GC (LGC) statistic
//   F = log(l(reduced) / l(full))       classical GC measure, n F ~ chi2_p
//
// and the non-asymptotic false-positive bound for thresholding T at t > 0:
//
//   P[false positive] <= 2 exp(-n / (8 (1 + gamma t0 sqrt(log(2p)/n))^2)),
//   gamma = (t + 2) / t.

#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "lgc/errors.hpp"
#include "lgc/regression.hpp"

namespace lgc {

inline constexpr double kDefaultT0 = 0.25;
inline constexpr double kDefaultFpr = 0.01;

struct GcResult {
  double full_loss = 0.0;
  double reduced_loss = 0.0;
  double lgc = 0.0;
  double classical_f = 0.0;
  double lambda = 0.0;
  int n = 0;
  int p = 0;
  int d = 0;
  int source_channel = 0;
  int target_channel = 0;
  /// The full model reproduced the response exactly (zero loss).
  bool interpolated = false;
  /// OLS on a rank-deficient or over-parameterized design; computed but not
  /// statistically meaningful.
  bool untrustworthy = false;
};

inline GcResult lgc_statistic(const DesignProblem& full_problem, int source,
                              const LassoFit& full, const LassoFit& reduced) {
  detail::require(full.lambda == reduced.lambda,
                  "lgc_statistic: full and reduced fits must share lambda (" +
                      std::to_string(full.lambda) + " vs " +
                      std::to_string(reduced.lambda) + ")");
  detail::require(source != full_problem.target_channel,
                  "lgc_statistic: source equals target");
  detail::require(full_problem.has_channel(source),
                  "lgc_statistic: source channel not in the full design");
  GcResult r;
  r.full_loss = full.loss;
  r.reduced_loss = reduced.loss;
  r.lambda = full.lambda;
  r.n = full_problem.n;
  r.p = full_problem.p;
  r.d = full_problem.blocks();
  r.source_channel = source;
  r.target_channel = full_problem.target_channel;
  r.untrustworthy = full.lambda == 0.0 &&
                    (full.rank_deficient || full.overfit ||
                     reduced.rank_deficient || reduced.overfit);
  if (full.loss > 0.0) {
    r.lgc = (reduced.loss - full.loss) / full.loss;
    r.classical_f = std::log1p(r.lgc);
  } else {
    r.interpolated = true;
    r.untrustworthy = true;
    if (reduced.loss > 0.0) {
      r.lgc = std::numeric_limits<double>::infinity();
      r.classical_f = std::numeric_limits<double>::infinity();
    } else {
      r.lgc = std::numeric_limits<double>::quiet_NaN();
      r.classical_f = std::numeric_limits<double>::quiet_NaN();
    }
  }
  return r;
}

/// How the penalty of a GC analysis is chosen.
struct LambdaChoice {
  enum class Mode { fixed, cv };
  Mode mode = Mode::cv;
  double value = 0.0;  // fixed mode; 0 means ordinary least squares
  int folds = 5;
  int grid_size = 50;
  double grid_ratio = 1e-4;
  CvOptions cv{};

  static LambdaChoice fixed(double lambda) {
    LambdaChoice c;
    c.mode = Mode::fixed;
    c.value = lambda;
    return c;
  }
  static LambdaChoice cross_validated(int folds = 5) {
    LambdaChoice c;
    c.mode = Mode::cv;
    c.folds = folds;
    return c;
  }
};

/// Fits with lambda = 0 go through least squares, everything else through
/// coordinate descent.
inline LassoFit fit_penalized(const DesignProblem& problem, double lambda,
                              const LassoOptions& opt = {}) {
  return lambda == 0.0 ? fit_ols(problem) : fit_lasso(problem, lambda, opt);
}

inline double choose_lambda(const DesignProblem& full,
                            const LambdaChoice& choice) {
  if (choice.mode == LambdaChoice::Mode::fixed) {
    detail::require(choice.value >= 0.0 && std::isfinite(choice.value),
                    "lambda must be finite and >= 0");
    return choice.value;
  }
  const auto grid =
      default_lambda_grid(full, choice.grid_size, choice.grid_ratio);
  return cross_validate_lambda(full, grid, choice.folds, choice.cv)
      .chosen_lambda;
}

/// Full and reduced fits on an existing full design, sharing one lambda.
struct GcFits {
  GcResult result;
  LassoFit full;
  LassoFit reduced;
};

inline GcFits gc_from_design(const DesignProblem& full_problem, int source,
                             const LambdaChoice& choice,
                             const LassoOptions& opt = {}) {
  const double lambda = choose_lambda(full_problem, choice);
  const DesignProblem reduced_problem = restrict(full_problem, source);
  GcFits out;
  out.full = fit_penalized(full_problem, lambda, opt);
  out.reduced = fit_penalized(reduced_problem, lambda, opt);
  out.result = lgc_statistic(full_problem, source, out.full, out.reduced);
  return out;
}

/// Conditional LGC: the full model regresses the target on every channel's
/// lags; the reduced model drops only the source's block.
inline GcResult conditional_lgc(const MatrixXd& series, int target, int source,
                                int p, double lambda,
                                const LassoOptions& opt = {}) {
  detail::require(series.cols() >= 2, "conditional_lgc: need >= 2 channels");
  detail::require(source != target, "conditional_lgc: source equals target");
  detail::require(source >= 0 && source < series.cols(),
                  "conditional_lgc: source channel out of range");
  const DesignProblem full = build_design(series, target, p);
  return gc_from_design(full, source, LambdaChoice::fixed(lambda), opt).result;
}

/// Upper tail P(chi2_dof > x) via the regularized incomplete gamma function.
inline double chi2_sf(double x, int dof) {
  detail::require(dof >= 1, "chi2_sf: dof must be >= 1");
  detail::require(!(x < 0.0), "chi2_sf: x must be >= 0");
  if (std::isinf(x)) return 0.0;
  if (x == 0.0) return 1.0;
  return boost::math::gamma_q(0.5 * dof, 0.5 * x);
}

struct Chi2Test {
  double statistic = 0.0;  // n F
  int dof = 0;
  double p_value = 1.0;
  std::string warning;
};

inline Chi2Test classical_gc_test(const GcResult& result) {
  if (!std::isfinite(result.classical_f)) {
    throw NumericalError("classical_gc_test: GC measure is not finite");
  }
  Chi2Test t;
  t.dof = result.p;
  t.statistic = result.n * std::max(result.classical_f, 0.0);
  t.p_value = chi2_sf(t.statistic, t.dof);
  if (result.lambda != 0.0) {
    t.warning = "chi-square calibration assumes least-squares fits (lambda = 0)";
  } else if (result.untrustworthy) {
    t.warning = "least-squares fit is rank deficient or over-parameterized";
  }
  return t;
}

/// Raw bound (may exceed 1) and its clamp to [0, 1].
struct FpBound {
  double raw = 2.0;
  double clamped = 1.0;
};

namespace detail {

inline double log_dim(int p, int channels) {
  return std::log(static_cast<double>(channels) * p);
}

}  // namespace detail

/// False-positive bound for thresholding T at `threshold`. `channels` is the
/// number of column blocks in the full model (2 for the bivariate case, where
/// log(channels * p) = log(2p)).
inline FpBound fp_bound(double threshold, int n, int p, double t0,
                        int channels = 2) {
  detail::require(threshold > 0.0, "fp_probability: threshold must be > 0");
  detail::require(n >= 1 && p >= 1 && channels >= 1,
                  "fp_probability: sizes must be positive");
  detail::require(t0 > 0.0, "fp_probability: t0 must be > 0");
  FpBound b;
  const double s = std::sqrt(detail::log_dim(p, channels) / n);
  const double gamma = std::isinf(threshold) ? 1.0 : (threshold + 2.0) / threshold;
  const double denom = 1.0 + gamma * t0 * s;
  b.raw = 2.0 * std::exp(-static_cast<double>(n) / (8.0 * denom * denom));
  b.clamped = std::clamp(b.raw, 0.0, 1.0);
  return b;
}

inline double fp_probability(double threshold, int n, int p, double t0,
                             int channels = 2) {
  return fp_bound(threshold, n, p, t0, channels).clamped;
}

/// p-value of an observed LGC statistic: the false-positive bound with the
/// statistic itself as the threshold. Non-positive statistics get 1.
inline double lgc_p_value(double statistic, int n, int p, double t0,
                          int channels = 2) {
  if (!(statistic > 0.0)) return 1.0;
  return fp_probability(statistic, n, p, t0, channels);
}

struct ThresholdRule {
  double threshold = 0.0;
  double t0 = kDefaultT0;
  double gamma = 0.0;
  double fp_bound = 0.0;  // raw bound at `threshold`
  int n = 0;
  int p = 0;
  int channels = 2;
};

/// No positive threshold reaches the requested false-positive level.
class InfeasibleThreshold : public InputError {
 public:
  InfeasibleThreshold(const std::string& what, long min_n)
      : InputError(what), min_n_(min_n) {}
  long min_n() const { return min_n_; }

 private:
  long min_n_;
};

namespace detail {

inline double solved_gamma(double target_fpr, long n, int p, double t0,
                           int channels) {
  const double s = std::sqrt(log_dim(p, channels) / static_cast<double>(n));
  const double level = std::log(2.0 / target_fpr);
  return (std::sqrt(static_cast<double>(n) / (8.0 * level)) - 1.0) / (t0 * s);
}

}  // namespace detail

/// Inverts the false-positive bound: the threshold whose bound equals
/// target_fpr. A target >= 2 is vacuous (any positive threshold meets it) and
/// returns threshold 0 with gamma = infinity.
inline ThresholdRule threshold_for_fpr(double target_fpr, int n, int p,
                                       double t0 = kDefaultT0,
                                       int channels = 2) {
  detail::require(target_fpr > 0.0, "threshold_for_fpr: target must be > 0");
  detail::require(n >= 1 && p >= 1 && channels >= 1,
                  "threshold_for_fpr: sizes must be positive");
  detail::require(t0 > 0.0, "threshold_for_fpr: t0 must be > 0");
  ThresholdRule rule;
  rule.t0 = t0;
  rule.n = n;
  rule.p = p;
  rule.channels = channels;
  if (target_fpr >= 2.0) {
    rule.threshold = 0.0;
    rule.gamma = std::numeric_limits<double>::infinity();
    rule.fp_bound = 2.0;
    return rule;
  }
  const double gamma = detail::solved_gamma(target_fpr, n, p, t0, channels);
  if (!(gamma > 1.0)) {
    // gamma grows with n; find the first n that clears 1.
    long hi = std::max<long>(n, 1);
    while (detail::solved_gamma(target_fpr, hi, p, t0, channels) <= 1.0) {
      hi *= 2;
    }
    long lo = hi / 2;
    while (hi - lo > 1) {
      const long mid = lo + (hi - lo) / 2;
      if (detail::solved_gamma(target_fpr, mid, p, t0, channels) > 1.0) {
        hi = mid;
      } else {
        lo = mid;
      }
    }
    throw InfeasibleThreshold(
        "threshold_for_fpr: no positive threshold reaches false-positive "
        "level " + std::to_string(target_fpr) + " at n = " + std::to_string(n) +
            "; need n >= " + std::to_string(hi),
        hi);
  }
  rule.gamma = gamma;
  rule.threshold = 2.0 / (gamma - 1.0);
  rule.fp_bound = fp_bound(rule.threshold, n, p, t0, channels).raw;
  return rule;
}

/// Smallest n with n >= 2 max{D^2 k^2 / t0^2, 2 D gamma k} log(2p).
inline std::int64_t corollary_sampling_requirement(int k, int p, double t0,
                                                   double gamma,
                                                   double d_tilde) {
  detail::require(k >= 1 && p >= 1, "corollary_sampling_requirement: k, p >= 1");
  detail::require(t0 > 0.0 && gamma > 0.0 && d_tilde > 0.0,
                  "corollary_sampling_requirement: t0, gamma, D must be > 0");
  const double quad = d_tilde * d_tilde * k * k / (t0 * t0);
  const double lin = 2.0 * d_tilde * gamma * k;
  const double need = 2.0 * std::max(quad, lin) * std::log(2.0 * p);
  return static_cast<std::int64_t>(std::ceil(need));
}

}  // namespace lgc
