#pragma once

// Shared fixtures for the unit tests and the acceptance binary.

#include <cstdint>
#include <vector>

#include "lgc/lgc.hpp"

namespace lgc::testing {

inline MatrixXd gaussian_matrix(GaussianStream& g, Eigen::Index rows,
                                Eigen::Index cols) {
  MatrixXd m(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c) {
    for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = g.normal();
  }
  return m;
}

inline VectorXd gaussian_vector(GaussianStream& g, Eigen::Index n) {
  VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = g.normal();
  return v;
}

/// Random stable VAR(p): Gaussian coefficients rescaled so the companion
/// spectral radius equals `radius`, and a random positive definite noise.
inline VarModel random_stable_model(int d, int p, std::uint64_t seed,
                                    double radius = 0.9) {
  GaussianStream g(seed);
  std::vector<MatrixXd> coeffs;
  for (int i = 0; i < p; ++i) coeffs.push_back(gaussian_matrix(g, d, d) * 0.3);
  const MatrixXd l = gaussian_matrix(g, d, d);
  MatrixXd sigma = l * l.transpose() / d + 0.1 * MatrixXd::Identity(d, d);
  sigma = 0.5 * (sigma + sigma.transpose()).eval();
  const double r0 = check_stability(VarModel(coeffs, sigma)).spectral_radius;
  // Scaling A_i by s^i scales every companion eigenvalue by s.
  const double s = radius / r0;
  double si = 1.0;
  for (int i = 0; i < p; ++i) {
    si *= s;
    coeffs[i] *= si;
  }
  return VarModel(std::move(coeffs), sigma);
}

/// Two independent scalar AR(1) channels.
inline VarModel independent_ar_pair(double a = 0.5, double b = -0.3) {
  MatrixXd a1 = MatrixXd::Zero(2, 2);
  a1(0, 0) = a;
  a1(1, 1) = b;
  return VarModel({a1}, MatrixXd::Identity(2, 2));
}

/// Full-column-rank regression problem x = X beta + noise.
inline DesignProblem random_problem(int n, int cols, std::uint64_t seed,
                                    double noise = 0.5) {
  GaussianStream g(seed);
  DesignProblem prob;
  prob.design = gaussian_matrix(g, n, cols);
  const VectorXd beta = gaussian_vector(g, cols);
  prob.response = prob.design * beta + noise * gaussian_vector(g, n);
  prob.n = n;
  prob.p = cols;
  prob.d = 1;
  prob.block_channels = {0};
  return prob;
}

/// Explicit normal-equation solve (X^T X)^{-1} X^T x.
inline VectorXd normal_equation_solution(const DesignProblem& prob) {
  const MatrixXd xtx = prob.design.transpose() * prob.design;
  return xtx.ldlt().solve(prob.design.transpose() * prob.response);
}

}  // namespace lgc::testing
