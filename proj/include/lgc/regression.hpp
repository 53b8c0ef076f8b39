#pragma once

// Lagged regression problems and their least-squares / LASSO solutions.
//
// The LASSO objective is (1/n)||x - X theta||^2 + lambda ||theta||_1 with raw
// (unstandardized) columns and no intercept. It is minimized by cyclic
// coordinate descent on the Gram form
//
//   Q = X^T X / n,  b = X^T x / n,  g = b - Q theta,
//
// so a coordinate update costs O(1) when the coefficient does not move and
// O(#columns) when it does.

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "lgc/errors.hpp"

namespace lgc {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Response vector and lagged design for one target channel.
///
/// Row i corresponds to time t = T-1-i (latest first). Column blocks hold p
/// consecutive lags (most recent first) of one source channel; the target's
/// own block comes first, the remaining channels follow in ascending order.
struct DesignProblem {
  VectorXd response;
  MatrixXd design;
  int n = 0;  // rows
  int p = 0;  // lags per block
  int d = 0;  // channels in the source series
  int target_channel = 0;
  std::vector<int> block_channels;

  int blocks() const { return static_cast<int>(block_channels.size()); }
  int columns() const { return static_cast<int>(design.cols()); }

  bool has_channel(int channel) const {
    return std::find(block_channels.begin(), block_channels.end(), channel) !=
           block_channels.end();
  }

  /// Index of `channel`'s block within this problem.
  int block_position(int channel) const {
    const auto it =
        std::find(block_channels.begin(), block_channels.end(), channel);
    if (it == block_channels.end()) {
      throw InputError("channel " + std::to_string(channel) +
                       " has no column block in this design");
    }
    return static_cast<int>(it - block_channels.begin());
  }

  int first_column(int channel) const { return block_position(channel) * p; }
};

inline DesignProblem build_design(const MatrixXd& series, int target_channel,
                                  int p) {
  const auto rows = static_cast<int>(series.rows());
  const auto d = static_cast<int>(series.cols());
  detail::require(p >= 1, "build_design: order p must be >= 1");
  detail::require(d >= 1, "build_design: series has no channels");
  detail::require(target_channel >= 0 && target_channel < d,
                  "build_design: target channel " +
                      std::to_string(target_channel) + " out of range [0, " +
                      std::to_string(d) + ")");
  detail::require(rows >= p + 1, "build_design: series has " +
                                     std::to_string(rows) +
                                     " rows, need at least p+1 = " +
                                     std::to_string(p + 1));
  detail::require(series.allFinite(), "build_design: non-finite sample");

  DesignProblem prob;
  prob.n = rows - p;
  prob.p = p;
  prob.d = d;
  prob.target_channel = target_channel;
  prob.block_channels.push_back(target_channel);
  for (int c = 0; c < d; ++c) {
    if (c != target_channel) prob.block_channels.push_back(c);
  }
  prob.response.resize(prob.n);
  prob.design.resize(prob.n, static_cast<Eigen::Index>(d) * p);
  for (int i = 0; i < prob.n; ++i) {
    const int t = rows - 1 - i;
    prob.response(i) = series(t, target_channel);
    for (int blk = 0; blk < d; ++blk) {
      const int c = prob.block_channels[blk];
      for (int lag = 1; lag <= p; ++lag) {
        prob.design(i, blk * p + lag - 1) = series(t - lag, c);
      }
    }
  }
  return prob;
}

/// Drops `drop_channel`'s column block (the reduced model).
inline DesignProblem restrict(const DesignProblem& problem, int drop_channel) {
  detail::require(drop_channel != problem.target_channel,
                  "restrict: cannot drop the target channel's own block");
  const int pos = problem.block_position(drop_channel);
  DesignProblem out;
  out.response = problem.response;
  out.n = problem.n;
  out.p = problem.p;
  out.d = problem.d;
  out.target_channel = problem.target_channel;
  out.block_channels = problem.block_channels;
  out.block_channels.erase(out.block_channels.begin() + pos);
  const int p = problem.p;
  out.design.resize(problem.n, static_cast<Eigen::Index>(out.blocks()) * p);
  int col = 0;
  for (int blk = 0; blk < problem.blocks(); ++blk) {
    if (blk == pos) continue;
    out.design.middleCols(col, p) = problem.design.middleCols(blk * p, p);
    col += p;
  }
  return out;
}

struct LassoOptions {
  /// Sweep stops when max |delta theta_j| < tol * max(1, ||theta||_inf)...
  double tol = 1e-8;
  /// ...and the KKT residual (column-standardized) is below kkt_tol.
  double kkt_tol = 1e-6;
  int max_sweeps = 100000;
  /// Every this many sweeps the solver takes sign-preserving Newton steps on
  /// the current active set (kept only if the objective does not rise).
  /// 0 disables.
  int polish_interval = 10;
};

/// Result of fit_lasso / fit_ols.
struct LassoFit {
  VectorXd coeffs;
  double lambda = 0.0;
  double loss = 0.0;  // (1/n)||x - X theta||^2
  int iterations = 0;
  bool converged = false;
  double kkt_violation = 0.0;
  bool objective_monotone = true;
  // OLS diagnostics (fit_ols only).
  int rank = -1;
  bool rank_deficient = false;
  bool overfit = false;

  double objective() const { return loss + lambda * coeffs.lpNorm<1>(); }
};

/// Process-wide counters over every LASSO solve, for certification reports.
struct SolverStats {
  std::atomic<long> solves{0};
  std::atomic<long> converged{0};
  std::atomic<long> kkt_failures{0};
  std::atomic<long> non_monotone{0};
  std::atomic<long> polished{0};

  void reset() {
    solves = 0;
    converged = 0;
    kkt_failures = 0;
    non_monotone = 0;
    polished = 0;
  }
};

inline SolverStats& solver_stats() {
  static SolverStats stats;
  return stats;
}

inline double soft_threshold(double z, double t) {
  detail::require(t >= 0.0, "soft_threshold: threshold must be >= 0");
  if (z > t) return z - t;
  if (z < -t) return z + t;
  return 0.0;
}

/// Sufficient statistics of a least-squares problem.
struct GramSystem {
  MatrixXd q;  // X^T X / n
  VectorXd b;  // X^T x / n
  double yy = 0.0;  // x^T x / n

  static GramSystem from(const MatrixXd& design, const VectorXd& response) {
    const double inv_n = 1.0 / static_cast<double>(design.rows());
    GramSystem g;
    g.q.resize(design.cols(), design.cols());
    g.q.setZero();
    g.q.selfadjointView<Eigen::Lower>().rankUpdate(design.transpose(), inv_n);
    g.q = g.q.selfadjointView<Eigen::Lower>();
    g.b = design.transpose() * response * inv_n;
    g.yy = response.squaredNorm() * inv_n;
    return g;
  }
};

/// Smallest lambda for which theta = 0 solves the LASSO: (2/n)||X^T x||_inf.
inline double lambda_max(const DesignProblem& problem) {
  if (problem.n == 0 || problem.columns() == 0) return 0.0;
  return 2.0 * (problem.design.transpose() * problem.response).cwiseAbs().maxCoeff() /
         problem.n;
}

/// Column-standardized KKT residual of theta for the given gradient
/// half-vector g = b - Q theta.
inline double kkt_violation_from_gradient(const VectorXd& theta,
                                          const VectorXd& g,
                                          const VectorXd& column_scale,
                                          double lambda) {
  double worst = 0.0;
  for (Eigen::Index j = 0; j < theta.size(); ++j) {
    if (column_scale(j) <= 0.0) continue;
    const double grad = 2.0 * g(j);
    double v;
    if (theta(j) == 0.0) {
      v = std::max(0.0, std::abs(grad) - lambda);
    } else {
      v = std::abs(grad - lambda * (theta(j) > 0 ? 1.0 : -1.0));
    }
    worst = std::max(worst, v / column_scale(j));
  }
  return worst;
}

/// Independent KKT check computed from the raw residual r = x - X theta.
inline double kkt_violation(const DesignProblem& problem, const LassoFit& fit) {
  const VectorXd r = problem.response - problem.design * fit.coeffs;
  const VectorXd g = problem.design.transpose() * r / problem.n;
  const VectorXd scale =
      (problem.design.colwise().squaredNorm().transpose() / problem.n)
          .cwiseSqrt();
  return kkt_violation_from_gradient(fit.coeffs, g, scale, fit.lambda);
}

namespace detail {

inline double gram_loss(const GramSystem& sys, const VectorXd& theta,
                        const VectorXd& g) {
  return std::max(0.0, sys.yy - (sys.b + g).dot(theta));
}

/// Newton steps on the active set: minimize the objective over the orthant
/// fixed by the current signs and move toward that minimizer until the first
/// coefficient reaches zero; drop it and repeat. The objective is a convex
/// quadratic on each orthant, so no step increases it.
inline bool polish_active_set(const GramSystem& sys, double lambda,
                              VectorXd& theta, VectorXd& g,
                              int max_steps = 16) {
  const double start_obj =
      gram_loss(sys, theta, g) + lambda * theta.lpNorm<1>();
  VectorXd work = theta;
  bool moved = false;
  for (int step_no = 0; step_no < max_steps; ++step_no) {
    std::vector<Eigen::Index> active;
    for (Eigen::Index j = 0; j < work.size(); ++j) {
      if (work(j) != 0.0) active.push_back(j);
    }
    if (active.empty()) break;
    const auto k = static_cast<Eigen::Index>(active.size());
    MatrixXd qaa(k, k);
    VectorXd rhs(k), sign(k), cur(k);
    for (Eigen::Index a = 0; a < k; ++a) {
      cur(a) = work(active[a]);
      sign(a) = cur(a) > 0 ? 1.0 : -1.0;
      rhs(a) = sys.b(active[a]) - 0.5 * lambda * sign(a);
      for (Eigen::Index c = 0; c < k; ++c) qaa(a, c) = sys.q(active[a], active[c]);
    }
    Eigen::LDLT<MatrixXd> ldlt(qaa);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
        ldlt.rcond() < 1e-12) {
      break;
    }
    const VectorXd sol = ldlt.solve(rhs);
    if (!sol.allFinite()) break;

    double step = 1.0;
    Eigen::Index blocking = -1;
    for (Eigen::Index a = 0; a < k; ++a) {
      if (sol(a) * sign(a) <= 0.0) {
        const double t = cur(a) / (cur(a) - sol(a));
        if (t < step) {
          step = t;
          blocking = a;
        }
      }
    }
    for (Eigen::Index a = 0; a < k; ++a) {
      double v = cur(a) + step * (sol(a) - cur(a));
      if (a == blocking || v * sign(a) < 0.0) v = 0.0;
      work(active[a]) = v;
    }
    moved = true;
    if (blocking < 0) break;
  }
  if (!moved) return false;
  const VectorXd g_new = sys.b - sys.q * work;
  const double new_obj = gram_loss(sys, work, g_new) + lambda * work.lpNorm<1>();
  if (!(new_obj <= start_obj)) return false;
  theta = std::move(work);
  g = g_new;
  return true;
}

}  // namespace detail

/// Cyclic coordinate descent on a Gram system. `warm` (if given) seeds the
/// iterate. The returned loss is computed from the Gram statistics.
inline LassoFit lasso_gram(const GramSystem& sys, double lambda,
                           const VectorXd* warm = nullptr,
                           const LassoOptions& opt = {}) {
  detail::require(lambda >= 0.0 && std::isfinite(lambda),
                  "fit_lasso: lambda must be finite and >= 0");
  const auto m = sys.q.rows();
  VectorXd theta = warm ? *warm : VectorXd::Zero(m);
  detail::require(theta.size() == m, "fit_lasso: warm start has wrong size");
  const VectorXd diag = sys.q.diagonal();
  const VectorXd scale = diag.cwiseMax(0.0).cwiseSqrt();
  for (Eigen::Index j = 0; j < m; ++j) {
    if (diag(j) <= 0.0) theta(j) = 0.0;
  }
  VectorXd g = sys.b - sys.q * theta;
  const double half_lambda = 0.5 * lambda;

  LassoFit fit;
  fit.lambda = lambda;
  double prev_obj = detail::gram_loss(sys, theta, g) + lambda * theta.lpNorm<1>();
  auto& stats = solver_stats();
  ++stats.solves;

  for (int sweep = 1; sweep <= opt.max_sweeps; ++sweep) {
    fit.iterations = sweep;
    double max_delta = 0.0;
    for (Eigen::Index j = 0; j < m; ++j) {
      const double qjj = diag(j);
      if (qjj <= 0.0) continue;
      const double old = theta(j);
      const double z = g(j) + qjj * old;
      double updated;
      if (z > half_lambda) {
        updated = (z - half_lambda) / qjj;
      } else if (z < -half_lambda) {
        updated = (z + half_lambda) / qjj;
      } else {
        updated = 0.0;
      }
      const double delta = updated - old;
      if (delta != 0.0) {
        theta(j) = updated;
        g.noalias() -= sys.q.col(j) * delta;
        max_delta = std::max(max_delta, std::abs(delta));
      }
    }
    if (sweep % 100 == 0) g = sys.b - sys.q * theta;

    const double obj =
        detail::gram_loss(sys, theta, g) + lambda * theta.lpNorm<1>();
    if (obj > prev_obj + 1e-10 * std::max(1.0, std::abs(prev_obj))) {
      fit.objective_monotone = false;
    }
    prev_obj = obj;

    const double bound = opt.tol * std::max(1.0, theta.lpNorm<Eigen::Infinity>());
    if (max_delta < bound) {
      g = sys.b - sys.q * theta;
      fit.kkt_violation =
          kkt_violation_from_gradient(theta, g, scale, lambda);
      if (fit.kkt_violation <= opt.kkt_tol) {
        fit.converged = true;
        break;
      }
    }
    if (opt.polish_interval > 0 && sweep % opt.polish_interval == 0) {
      if (detail::polish_active_set(sys, lambda, theta, g)) {
        ++stats.polished;
        const double pobj =
            detail::gram_loss(sys, theta, g) + lambda * theta.lpNorm<1>();
        prev_obj = std::min(prev_obj, pobj);
      }
    }
  }
  if (!fit.converged) {
    g = sys.b - sys.q * theta;
    fit.kkt_violation = kkt_violation_from_gradient(theta, g, scale, lambda);
  }
  fit.loss = detail::gram_loss(sys, theta, g);
  fit.coeffs = std::move(theta);
  if (fit.converged) ++stats.converged;
  if (fit.converged && fit.kkt_violation > opt.kkt_tol) ++stats.kkt_failures;
  if (!fit.objective_monotone) ++stats.non_monotone;
  return fit;
}

inline LassoFit fit_lasso(const DesignProblem& problem, double lambda,
                          const LassoOptions& opt = {},
                          const VectorXd* warm = nullptr) {
  const GramSystem sys = GramSystem::from(problem.design, problem.response);
  LassoFit fit = lasso_gram(sys, lambda, warm, opt);
  fit.loss = (problem.response - problem.design * fit.coeffs).squaredNorm() /
             problem.n;
  return fit;
}

/// Fits every lambda in `grid` (any order) from one Gram system, warm-starting
/// in descending lambda. Results are returned in grid order.
inline std::vector<LassoFit> fit_lasso_path(const DesignProblem& problem,
                                            const std::vector<double>& grid,
                                            const LassoOptions& opt = {}) {
  const GramSystem sys = GramSystem::from(problem.design, problem.response);
  std::vector<int> order(grid.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return grid[a] > grid[b]; });
  std::vector<LassoFit> fits(grid.size());
  VectorXd warm = VectorXd::Zero(problem.columns());
  for (int idx : order) {
    fits[idx] = lasso_gram(sys, grid[idx], &warm, opt);
    warm = fits[idx].coeffs;
    fits[idx].loss =
        (problem.response - problem.design * fits[idx].coeffs).squaredNorm() /
        problem.n;
  }
  return fits;
}

/// Least squares; minimum-norm solution when X is rank deficient.
inline LassoFit fit_ols(const DesignProblem& problem) {
  LassoFit fit;
  fit.lambda = 0.0;
  fit.converged = true;
  fit.iterations = 1;
  if (problem.columns() == 0) {
    fit.coeffs.resize(0);
    fit.loss = problem.response.squaredNorm() / problem.n;
    fit.rank = 0;
    return fit;
  }
  Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod;
  cod.setThreshold(1e-10);
  cod.compute(problem.design);
  fit.coeffs = cod.solve(problem.response);
  fit.rank = static_cast<int>(cod.rank());
  fit.rank_deficient = fit.rank < problem.columns();
  const VectorXd r = problem.response - problem.design * fit.coeffs;
  fit.loss = r.squaredNorm() / problem.n;
  const double yy = problem.response.squaredNorm() / problem.n;
  fit.overfit = problem.n <= problem.columns() || fit.loss <= 1e-12 * yy;
  const VectorXd g = problem.design.transpose() * r / problem.n;
  const VectorXd scale =
      (problem.design.colwise().squaredNorm().transpose() / problem.n)
          .cwiseSqrt();
  // Stationarity of the unpenalized problem: every gradient entry vanishes.
  fit.kkt_violation = kkt_violation_from_gradient(
      VectorXd::Zero(fit.coeffs.size()), g, scale, 0.0);
  return fit;
}

/// `count` log-spaced values from lambda_max down to ratio * lambda_max.
inline std::vector<double> default_lambda_grid(const DesignProblem& problem,
                                               int count = 50,
                                               double ratio = 1e-4) {
  detail::require(count >= 1, "default_lambda_grid: count must be >= 1");
  detail::require(ratio > 0.0 && ratio <= 1.0,
                  "default_lambda_grid: ratio must be in (0, 1]");
  const double top = lambda_max(problem);
  if (!(top > 0.0)) {
    throw NumericalError("default_lambda_grid: lambda_max is zero (response "
                         "orthogonal to every regressor)");
  }
  std::vector<double> grid(count);
  for (int i = 0; i < count; ++i) {
    const double frac = count == 1 ? 0.0 : static_cast<double>(i) / (count - 1);
    grid[i] = top * std::pow(ratio, frac);
  }
  return grid;
}

/// Log-spaced grid between lo and hi inclusive (ascending).
inline std::vector<double> log_grid(double lo, double hi, int count) {
  detail::require(lo > 0.0 && hi >= lo && count >= 1,
                  "log_grid: need 0 < lo <= hi and count >= 1");
  std::vector<double> grid(count);
  for (int i = 0; i < count; ++i) {
    const double frac = count == 1 ? 0.0 : static_cast<double>(i) / (count - 1);
    grid[i] = lo * std::pow(hi / lo, frac);
  }
  return grid;
}

struct CvOptions {
  /// Contiguous row blocks respect serial dependence; shuffled folds assign
  /// rows to folds at random (seeded).
  bool shuffle = false;
  std::uint64_t seed = 0;
  LassoOptions lasso{};
};

struct CvReport {
  std::vector<double> grid;
  /// fold_errors[i][f]: held-out MSE of grid[i] on fold f.
  std::vector<std::vector<double>> fold_errors;
  std::vector<double> mean_errors;
  double chosen_lambda = 0.0;
  int chosen_index = 0;
  int folds = 0;
};

/// K-fold cross-validation of the LASSO penalty on the given (full) problem.
/// The reduced model should reuse chosen_lambda rather than re-validate.
inline CvReport cross_validate_lambda(const DesignProblem& problem,
                                      const std::vector<double>& grid,
                                      int folds, const CvOptions& opt = {}) {
  detail::require(!grid.empty(), "cross_validate_lambda: empty lambda grid");
  for (double l : grid) {
    detail::require(l > 0.0 && std::isfinite(l),
                    "cross_validate_lambda: lambda grid must be positive");
  }
  detail::require(folds >= 2, "cross_validate_lambda: folds must be >= 2");
  detail::require(folds <= problem.n,
                  "cross_validate_lambda: more folds than rows");

  const int n = problem.n;
  std::vector<int> fold_of(n);
  if (opt.shuffle) {
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937_64 gen(opt.seed);
    // Fisher-Yates with an explicit index draw keeps this platform-stable.
    for (int i = n - 1; i > 0; --i) {
      const auto j = static_cast<int>(gen() % static_cast<std::uint64_t>(i + 1));
      std::swap(perm[i], perm[j]);
    }
    for (int i = 0; i < n; ++i) fold_of[perm[i]] = static_cast<int>(
        static_cast<long>(i) * folds / n);
  } else {
    for (int i = 0; i < n; ++i) {
      fold_of[i] = static_cast<int>(static_cast<long>(i) * folds / n);
    }
  }

  // Fit in descending lambda order for warm starts.
  std::vector<int> order(grid.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return grid[a] > grid[b]; });

  CvReport rep;
  rep.grid = grid;
  rep.folds = folds;
  rep.fold_errors.assign(grid.size(), std::vector<double>(folds, 0.0));

  const GramSystem full = GramSystem::from(problem.design, problem.response);
  for (int f = 0; f < folds; ++f) {
    std::vector<int> hold;
    for (int i = 0; i < n; ++i) {
      if (fold_of[i] == f) hold.push_back(i);
    }
    const auto nh = static_cast<Eigen::Index>(hold.size());
    const auto nt = n - nh;
    detail::require(nt > 0, "cross_validate_lambda: empty training fold");
    MatrixXd xh(nh, problem.columns());
    VectorXd yh(nh);
    for (Eigen::Index r = 0; r < nh; ++r) {
      xh.row(r) = problem.design.row(hold[r]);
      yh(r) = problem.response(hold[r]);
    }
    // Training statistics = full statistics minus held-out contribution.
    GramSystem train;
    const GramSystem held = GramSystem::from(xh, yh);
    const double wf = static_cast<double>(n) / nt;
    const double wh = static_cast<double>(nh) / nt;
    train.q = wf * full.q - wh * held.q;
    train.b = wf * full.b - wh * held.b;
    train.yy = wf * full.yy - wh * held.yy;

    VectorXd warm = VectorXd::Zero(problem.columns());
    for (int idx : order) {
      LassoFit fit = lasso_gram(train, grid[idx], &warm, opt.lasso);
      warm = fit.coeffs;
      rep.fold_errors[idx][f] = (yh - xh * fit.coeffs).squaredNorm() / nh;
    }
  }
  rep.mean_errors.resize(grid.size());
  double best = std::numeric_limits<double>::infinity();
  for (int idx : order) {  // ties resolve toward the larger lambda
    double s = 0.0;
    for (double e : rep.fold_errors[idx]) s += e;
    rep.mean_errors[idx] = s / folds;
    if (rep.mean_errors[idx] < best) {
      best = rep.mean_errors[idx];
      rep.chosen_index = idx;
    }
  }
  rep.chosen_lambda = grid[rep.chosen_index];
  return rep;
}

}  // namespace lgc
