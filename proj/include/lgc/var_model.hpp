#pragma once

// Stable vector-autoregressive processes
//
//   X_t = A_1 X_{t-1} + ... + A_p X_{t-p} + eps_t,   eps_t ~ N(0, Sigma)
//
// together with their companion (VAR(1)) embedding, population
// autocovariances, spectral density and the spectral extrema that enter the
// estimation bounds in theory.hpp.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "lgc/errors.hpp"
#include "lgc/rng.hpp"

namespace lgc {

using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Companion spectral radius must stay below 1 - kStabilityMargin.
inline constexpr double kStabilityMargin = 1e-10;
inline constexpr int kDefaultBurnIn = 1000;
inline constexpr int kDefaultFrequencyGrid = 1024;
/// Largest companion dimension d*p accepted by the Lyapunov solver.
inline constexpr int kMaxCompanionDim = 512;
/// Companion dimensions up to this size use the Kronecker (vectorized)
/// Lyapunov solve; larger ones use Smith's doubling iteration.
inline constexpr int kKroneckerLyapunovDim = 32;

class VarModel {
 public:
  VarModel(std::vector<MatrixXd> coeffs, MatrixXd noise_cov)
      : coeffs_(std::move(coeffs)), noise_cov_(std::move(noise_cov)) {
    detail::require(!coeffs_.empty(), "VarModel: order must be positive");
    const auto d = noise_cov_.rows();
    detail::require(d > 0 && noise_cov_.cols() == d,
                    "VarModel: noise covariance must be square and non-empty");
    for (std::size_t i = 0; i < coeffs_.size(); ++i) {
      detail::require(coeffs_[i].rows() == d && coeffs_[i].cols() == d,
                      "VarModel: coefficient matrix A_" + std::to_string(i + 1) +
                          " is not " + std::to_string(d) + "x" +
                          std::to_string(d));
      detail::require(coeffs_[i].allFinite(),
                      "VarModel: non-finite coefficient");
    }
    detail::require(noise_cov_.allFinite(),
                    "VarModel: non-finite noise covariance");
    const double scale = std::max(1.0, noise_cov_.cwiseAbs().maxCoeff());
    detail::require(
        (noise_cov_ - noise_cov_.transpose()).cwiseAbs().maxCoeff() <=
            1e-12 * scale,
        "VarModel: noise covariance is not symmetric");
    noise_cov_ = 0.5 * (noise_cov_ + noise_cov_.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(noise_cov_,
                                                Eigen::EigenvaluesOnly);
    noise_min_eig_ = eig.eigenvalues()(0);
    noise_max_eig_ = eig.eigenvalues()(d - 1);
    detail::require(noise_min_eig_ >= -1e-12 * scale,
                    "VarModel: noise covariance is not positive semidefinite");
  }

  int dim() const { return static_cast<int>(noise_cov_.rows()); }
  int order() const { return static_cast<int>(coeffs_.size()); }
  const std::vector<MatrixXd>& coeffs() const { return coeffs_; }
  /// Lag-`lag` coefficient matrix, 1-based as in the model equation.
  const MatrixXd& coeff(int lag) const { return coeffs_.at(lag - 1); }
  const MatrixXd& noise_cov() const { return noise_cov_; }

  double noise_min_eigenvalue() const { return noise_min_eig_; }
  double noise_max_eigenvalue() const { return noise_max_eig_; }
  /// Positive definiteness is required by the spectral bounds; simulation
  /// also accepts degenerate (PSD) noise.
  bool noise_is_positive_definite() const { return noise_min_eig_ > 0.0; }

 private:
  std::vector<MatrixXd> coeffs_;
  MatrixXd noise_cov_;
  double noise_min_eig_ = 0.0;
  double noise_max_eig_ = 0.0;
};

struct CompanionForm {
  MatrixXd matrix;  // (d*p) x (d*p)
  MatrixXd noise;   // Sigma in the top-left d x d block, zero elsewhere
};

inline CompanionForm companion_form(const VarModel& model) {
  const int d = model.dim();
  const int p = model.order();
  const int n = d * p;
  CompanionForm out{MatrixXd::Zero(n, n), MatrixXd::Zero(n, n)};
  for (int lag = 1; lag <= p; ++lag) {
    out.matrix.block(0, (lag - 1) * d, d, d) = model.coeff(lag);
  }
  if (p > 1) out.matrix.bottomLeftCorner(n - d, n - d).setIdentity();
  out.noise.topLeftCorner(d, d) = model.noise_cov();
  return out;
}

struct StabilityReport {
  bool stable = false;
  double spectral_radius = 0.0;
};

inline StabilityReport check_stability(const VarModel& model,
                                       double margin = kStabilityMargin) {
  const CompanionForm comp = companion_form(model);
  Eigen::EigenSolver<MatrixXd> solver(comp.matrix, false);
  if (solver.info() != Eigen::Success) {
    throw NumericalError("check_stability: eigenvalue iteration did not converge");
  }
  const double radius = solver.eigenvalues().cwiseAbs().maxCoeff();
  return {radius < 1.0 - margin, radius};
}

inline bool is_stable(const VarModel& model, double margin = kStabilityMargin) {
  return check_stability(model, margin).stable;
}

namespace detail {

inline void require_stable(const VarModel& model, const char* who) {
  const StabilityReport s = check_stability(model);
  if (!s.stable) {
    throw InputError(std::string(who) +
                     ": model is not stable (companion spectral radius " +
                     std::to_string(s.spectral_radius) + ")");
  }
}

inline MatrixXd lyapunov_kronecker(const MatrixXd& a, const MatrixXd& q) {
  const auto n = a.rows();
  // vec(X) - (A kron A) vec(X) = vec(Q), column-major vec.
  MatrixXd system = MatrixXd::Identity(n * n, n * n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index l = 0; l < n; ++l) {
      const double a_jl = a(j, l);
      if (a_jl == 0.0) continue;
      // Block (j, l) of A kron A is a(j,l) * A.
      system.block(j * n, l * n, n, n) -= a_jl * a;
    }
  }
  const Eigen::Map<const VectorXd> rhs(q.data(), n * n);
  Eigen::PartialPivLU<MatrixXd> lu(system);
  VectorXd vec_x = lu.solve(rhs);
  if (!vec_x.allFinite()) {
    throw NumericalError("lyapunov: singular Kronecker system");
  }
  return Eigen::Map<MatrixXd>(vec_x.data(), n, n);
}

inline MatrixXd lyapunov_doubling(const MatrixXd& a, const MatrixXd& q) {
  MatrixXd x = q;
  MatrixXd ak = a;
  for (int iter = 0; iter < 128; ++iter) {
    const MatrixXd term = ak * x * ak.transpose();
    x += term;
    const double scale = std::max(x.cwiseAbs().maxCoeff(),
                                  std::numeric_limits<double>::min());
    if (term.cwiseAbs().maxCoeff() <= 1e-17 * scale) return x;
    ak = (ak * ak).eval();
  }
  throw NumericalError("lyapunov: doubling iteration did not converge");
}

}  // namespace detail

/// Solves X = A X A^T + Q for stable A.
inline MatrixXd solve_discrete_lyapunov(const MatrixXd& a, const MatrixXd& q) {
  detail::require(a.rows() == a.cols() && q.rows() == a.rows() &&
                      q.cols() == a.cols(),
                  "solve_discrete_lyapunov: dimension mismatch");
  detail::require(a.rows() <= kMaxCompanionDim,
                  "solve_discrete_lyapunov: dimension exceeds " +
                      std::to_string(kMaxCompanionDim));
  MatrixXd x = a.rows() <= kKroneckerLyapunovDim
                   ? detail::lyapunov_kronecker(a, q)
                   : detail::lyapunov_doubling(a, q);
  return 0.5 * (x + x.transpose());
}

/// Stationary covariance of the companion state [X_t; X_{t-1}; ...; X_{t-p+1}].
inline MatrixXd companion_covariance(const VarModel& model) {
  detail::require_stable(model, "companion_covariance");
  const CompanionForm comp = companion_form(model);
  return solve_discrete_lyapunov(comp.matrix, comp.noise);
}

/// Gamma(l) = E[X_t X_{t-l}^T] for l = 0..max_lag; Gamma(-l) = Gamma(l)^T.
inline std::vector<MatrixXd> autocovariance(const VarModel& model, int max_lag) {
  detail::require(max_lag >= 0, "autocovariance: max_lag must be >= 0");
  const int d = model.dim();
  const CompanionForm comp = companion_form(model);
  MatrixXd state = companion_covariance(model);
  std::vector<MatrixXd> out;
  out.reserve(max_lag + 1);
  out.push_back(state.topLeftCorner(d, d));
  for (int lag = 1; lag <= max_lag; ++lag) {
    state = (comp.matrix * state).eval();
    out.push_back(state.topLeftCorner(d, d));
  }
  return out;
}

struct Trajectory {
  MatrixXd data;  // rows are time steps (oldest first), columns are channels
  int burn_in = 0;
  std::uint64_t seed = 0;
};

namespace detail {

/// Returns L with L L^T = S for symmetric PSD S (Cholesky when possible).
inline MatrixXd psd_factor(const MatrixXd& s) {
  Eigen::LLT<MatrixXd> llt(s);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(s);
  const VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal();
}

}  // namespace detail

/// Simulates n + p samples (p = model order) after discarding `burn_in`
/// samples. The initial companion state is drawn from the stationary
/// distribution. Deterministic in (model, n, burn_in, seed).
inline Trajectory simulate(const VarModel& model, int n, int burn_in,
                           std::uint64_t seed) {
  detail::require(n >= 1, "simulate: n must be >= 1");
  detail::require(burn_in >= 0, "simulate: burn_in must be >= 0");
  detail::require_stable(model, "simulate");
  const int d = model.dim();
  const int p = model.order();
  const MatrixXd state_factor = detail::psd_factor(companion_covariance(model));
  const MatrixXd noise_factor = detail::psd_factor(model.noise_cov());

  GaussianStream rng(seed);
  VectorXd z(d * p);
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = rng.normal();
  const VectorXd init = state_factor * z;  // [X_{-1}; X_{-2}; ...; X_{-p}]

  const long total = static_cast<long>(burn_in) + n + p;
  // History ring: hist row k holds X at time index k (k < p are initial).
  MatrixXd hist(total + p, d);
  for (int lag = 0; lag < p; ++lag) {
    hist.row(p - 1 - lag) = init.segment(lag * d, d).transpose();
  }
  VectorXd eps(d), e(d);
  for (long t = p; t < total + p; ++t) {
    for (int i = 0; i < d; ++i) e(i) = rng.normal();
    eps.noalias() = noise_factor * e;
    VectorXd x = eps;
    for (int lag = 1; lag <= p; ++lag) {
      x.noalias() += model.coeff(lag) * hist.row(t - lag).transpose();
    }
    hist.row(t) = x.transpose();
  }
  return {hist.bottomRows(static_cast<Eigen::Index>(n) + p), burn_in, seed};
}

/// Characteristic polynomial A(z) = I - sum_j A_j z^j.
inline MatrixXcd characteristic_polynomial(const VarModel& model,
                                           std::complex<double> z) {
  const int d = model.dim();
  MatrixXcd out = MatrixXcd::Identity(d, d);
  std::complex<double> zj = 1.0;
  for (int lag = 1; lag <= model.order(); ++lag) {
    zj *= z;
    out -= zj * model.coeff(lag).cast<std::complex<double>>();
  }
  return out;
}

struct SpectralDensity {
  MatrixXcd value;
  /// A(e^{-i omega}) was numerically singular; value used a pseudo-inverse.
  bool near_singular = false;
};

/// F(omega) = (1/2pi) A^{-1}(e^{-i omega}) Sigma A^{-H}(e^{-i omega}).
inline SpectralDensity spectral_density(const VarModel& model, double omega) {
  detail::require_stable(model, "spectral_density");
  const std::complex<double> z = std::polar(1.0, -omega);
  const MatrixXcd a = characteristic_polynomial(model, z);
  Eigen::JacobiSVD<MatrixXcd> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const double smax = sv(0);
  const double smin = sv(sv.size() - 1);
  SpectralDensity out;
  MatrixXcd inv;
  if (smin <= 1e-12 * smax) {
    out.near_singular = true;
    svd.setThreshold(1e-12);
    inv = svd.solve(MatrixXcd::Identity(a.rows(), a.cols()));
  } else {
    inv = a.partialPivLu().inverse();
  }
  out.value = inv * model.noise_cov().cast<std::complex<double>>() *
              inv.adjoint() / (2.0 * std::numbers::pi);
  out.value = 0.5 * (out.value + out.value.adjoint()).eval();
  return out;
}

/// Frequency grid omega_k = -pi + 2 pi k / N, k = 0..N-1. Grids whose sizes
/// differ by powers of two are nested.
inline std::vector<double> frequency_grid(int grid_size) {
  std::vector<double> grid(grid_size);
  for (int k = 0; k < grid_size; ++k) {
    grid[k] = -std::numbers::pi + 2.0 * std::numbers::pi * k / grid_size;
  }
  return grid;
}

/// Grid approximations of the spectral extrema. mu_max and mu_min are the
/// max of Lambda_max and min of Lambda_min of A^H(z) A(z) on |z| = 1;
/// m_upper / m_lower are the max of Lambda_max and min of Lambda_min of F.
struct SpectralSummary {
  double mu_max = 0.0;
  double mu_min = 0.0;
  double mu_min_companion = 0.0;
  double m_upper = 0.0;
  double m_lower = 0.0;
  int grid_size = 0;
};

inline SpectralSummary spectral_summary(const VarModel& model,
                                        int grid_size = kDefaultFrequencyGrid) {
  detail::require(grid_size >= 64, "spectral_summary: grid_size must be >= 64");
  detail::require_stable(model, "spectral_summary");
  const CompanionForm comp = companion_form(model);
  const MatrixXcd comp_c = comp.matrix.cast<std::complex<double>>();
  const MatrixXcd sigma = model.noise_cov().cast<std::complex<double>>();
  const auto nc = comp.matrix.rows();

  SpectralSummary s;
  s.grid_size = grid_size;
  s.mu_max = 0.0;
  s.mu_min = std::numeric_limits<double>::infinity();
  s.mu_min_companion = std::numeric_limits<double>::infinity();
  s.m_upper = 0.0;
  s.m_lower = std::numeric_limits<double>::infinity();

  Eigen::SelfAdjointEigenSolver<MatrixXcd> eig;
  for (double omega : frequency_grid(grid_size)) {
    const std::complex<double> z = std::polar(1.0, -omega);
    const MatrixXcd a = characteristic_polynomial(model, z);

    eig.compute(a.adjoint() * a, Eigen::EigenvaluesOnly);
    s.mu_max = std::max(s.mu_max, eig.eigenvalues().maxCoeff());
    s.mu_min = std::min(s.mu_min, eig.eigenvalues().minCoeff());

    const MatrixXcd ac = MatrixXcd::Identity(nc, nc) - z * comp_c;
    eig.compute(ac.adjoint() * ac, Eigen::EigenvaluesOnly);
    s.mu_min_companion =
        std::min(s.mu_min_companion, eig.eigenvalues().minCoeff());

    const MatrixXcd inv = a.partialPivLu().inverse();
    MatrixXcd f = inv * sigma * inv.adjoint() / (2.0 * std::numbers::pi);
    f = 0.5 * (f + f.adjoint()).eval();
    eig.compute(f, Eigen::EigenvaluesOnly);
    s.m_upper = std::max(s.m_upper, eig.eigenvalues().maxCoeff());
    s.m_lower = std::min(s.m_lower, eig.eigenvalues().minCoeff());
  }
  s.mu_min = std::max(s.mu_min, 0.0);
  s.mu_min_companion = std::max(s.mu_min_companion, 0.0);
  s.m_lower = std::max(s.m_lower, 0.0);
  return s;
}

}  // namespace lgc
