#include <catch_amalgamated.hpp>

#include <cmath>

#include "support.hpp"

using namespace lgc;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

/// The illustrative instance: Sigma = 0.01 I, mu_max = 0.9,
/// mu_min = mu_min(companion) = 0.01, Schur minimum 0.7, cross norm 0.5,
/// ||v|| = 1.5, m = 8.
TheoryInputs worked_example(int n = 1000, int p = 100, int k = 1) {
  TheoryInputs in;
  in.sigma_min = in.sigma_max = in.sigma11 = 0.01;
  in.mu_max = 0.9;
  in.mu_min = in.mu_min_breve = 0.01;
  in.lambda_tilde_min = 0.7;
  in.cross_norm = 0.5;
  in.v_norm2 = 1.5;
  in.v_norm1 = 1.5;
  in.n = n;
  in.p = p;
  in.k = k;
  in.m = 8;
  return in;
}

/// x_t = a x_{t-1} + b y_{t-1} + e, y_t = c y_{t-1} + e', unit noise.
VarModel driven_pair(double a, double b, double c) {
  MatrixXd a1(2, 2);
  a1 << a, b, 0, c;
  return VarModel({a1}, MatrixXd::Identity(2, 2));
}

}  // namespace

TEST_CASE("worked example constants", "[theory]") {
  BoundConstants k;
  SECTION("derived A from the printed deviation constants") {
    const TheoryReport r = theory_report(worked_example(), k);
    CHECK_THAT(r.Q_full, WithinRel(5.2e-4 * 0.01 * (1 + 1.9 / 0.01), 1e-12));
    CHECK_THAT(r.Q_reduced,
               WithinRel(4.2e-4 * 0.01 * (1 + 1.9 / 0.01 + 3 * 1.5 / 0.01), 1e-12));
    CHECK(r.A_computed == std::max(r.Q_full, r.Q_reduced));
    CHECK(r.A_const == r.A_computed);
  }
  SECTION("constants at A = 1e-3") {
    k.A_override = 1e-3;
    const TheoryReport r = theory_report(worked_example(), k);
    CHECK(r.A_const == 1e-3);
    CHECK_THAT(r.alpha, WithinRel(0.01 / 1.8, 1e-14));
    CHECK_THAT(r.B_const, WithinRel(5.136, 0.05));
    CHECK_THAT(r.D_prime, WithinRel(24.38, 0.05));
    CHECK_THAT(r.D_tilde, WithinRel(10.67, 0.05));
    CHECK(r.K1 == 6.0);
    CHECK(r.K2 == 6.0);
    CHECK(r.d_bar == 1.0);
    // The theorem's penalty is 4A sqrt(log(2p)/n).
    CHECK_THAT(r.lambda_n, WithinRel(4e-3 * std::sqrt(std::log(200.0) / 1000), 1e-14));
    // Unsquared C' term, 2 alpha (||C11^-1 C12||^2 + 1) / (27 Lambda~).
    CHECK_THAT(std::sqrt(r.C_prime), WithinRel(7.41e-4, 0.01));
    CHECK(r.C_dprime == 100.0);
    CHECK_THAT(r.min_n_theorem,
               WithinRel(std::max(100.0, r.D_dprime) * std::log(200.0), 1e-14));
  }
  SECTION("m must exceed one") {
    TheoryInputs in = worked_example();
    in.m = 1.0;
    CHECK_THROWS_AS(theory_report(in, k), InputError);
  }
}

TEST_CASE("penalty and full-model radius scale with n", "[theory]") {
  BoundConstants k;
  k.A_override = 1e-3;
  const TheoryReport a = theory_report(worked_example(1000, 100, 3), k);
  const TheoryReport b = theory_report(worked_example(4000, 100, 3), k);
  CHECK_THAT(b.lambda_n, WithinRel(a.lambda_n / 2, 1e-14));
  CHECK_THAT(b.delta_F, WithinRel(a.delta_F / 4, 1e-14));
  const double m = 8;
  CHECK_THAT(a.delta_F,
             WithinRel(24 / (m + 1) * 3 * a.lambda_n * a.lambda_n / (a.alpha / m), 1e-14));
  double prev = a.lambda_n * 2;
  for (int n : {1000, 2000, 8000, 64000}) {
    const double l = theory_report(worked_example(n), k).lambda_n;
    CHECK(l < prev);
    prev = l;
  }
}

TEST_CASE("deviation radii", "[theory]") {
  const double lambda = 0.01, alpha = 0.2, m = 4, Q = 0.05, s = 0.1;
  const int k = 5;
  SECTION("no cross signal") {
    const DeviationRadii r = deviation_radii(lambda, alpha, m, k, Q, s, 0.3, 0.0, 0.0);
    CHECK(r.delta_D == 0.0);
    CHECK_THAT(r.delta_R,
               WithinRel(20 * k * lambda * lambda / (alpha / m) +
                             (8 * std::sqrt(2 * m) + 18) * lambda * 0.3,
                         1e-14));
  }
  SECTION("exactly sparse surrogate") {
    const DeviationRadii r = deviation_radii(lambda, alpha, m, k, Q, s, 0.0, 1.0, 0.8);
    CHECK_THAT(r.delta_R, WithinRel(20 * k * lambda * lambda / (alpha / m), 1e-14));
    const DeviationRadii r2 = deviation_radii(7 * lambda, alpha, m, k, Q, s, 0.0, 1.0, 0.8);
    CHECK_THAT(r.delta_F / r.delta_R, WithinRel(r2.delta_F / r2.delta_R, 1e-14));
    CHECK_THAT(r.delta_F / r.delta_R, WithinRel(24 / (m + 1) / 20, 1e-14));
  }
  SECTION("validation") {
    CHECK_THROWS_AS(deviation_radii(lambda, alpha, 1.0, k, Q, s, 0, 0, 0), InputError);
    CHECK_THROWS_AS(deviation_radii(lambda, 0.0, m, k, Q, s, 0, 0, 0), InputError);
  }
}

TEST_CASE("quadratic positivity bound", "[theory]") {
  CHECK(quadratic_positivity_bound(1, 0, 0) == 0.0);
  CHECK(quadratic_positivity_bound(1, 2, 3) == 10.0);
  const double x = std::sqrt(10.0);
  CHECK_THAT(x * x - 2 * x - 3, WithinAbs(0.675, 1e-3));
  GaussianStream g(5);
  for (int i = 0; i < 10000; ++i) {
    const double a = 0.01 + 10 * g.uniform();
    const double b = 10 * g.uniform();
    const double c = 10 * g.uniform();
    const double r = std::sqrt(quadratic_positivity_bound(a, b, c));
    CHECK(a * r * r - b * r - c >= -1e-12 * (a * r * r + b * r + c));
  }
  CHECK_THROWS_AS(quadratic_positivity_bound(0, 1, 1), InputError);
  CHECK_THROWS_AS(quadratic_positivity_bound(-1, 1, 1), InputError);
}

TEST_CASE("normal concentration bound", "[theory]") {
  CHECK_THAT(normal_concentration_bound(8, 1.0), WithinAbs(2 * std::exp(-1.0), 1e-15));
  CHECK_THAT(normal_concentration_bound(8, 1.0), WithinAbs(0.7358, 1e-4));
  for (int n = 1; n < 500; n += 37) {
    for (double t = 0.05; t < 3; t += 0.2) {
      CHECK(normal_concentration_bound(n + 1, t) < normal_concentration_bound(n, t));
      CHECK(normal_concentration_bound(n, t + 0.1) < normal_concentration_bound(n, t));
    }
  }
  CHECK_THROWS_AS(normal_concentration_bound(0, 1.0), InputError);
  CHECK_THROWS_AS(normal_concentration_bound(5, 0.0), InputError);

  GaussianStream g(123);
  for (auto [n, t] : {std::pair{50, 0.5}, std::pair{200, 0.25}}) {
    int hits = 0;
    const int trials = 100000;
    for (int i = 0; i < trials; ++i) {
      double s = 0;
      for (int j = 0; j < n; ++j) {
        const double z = g.normal();
        s += z * z;
      }
      if (std::abs(s / n - 1) >= t) ++hits;
    }
    CHECK(double(hits) / trials <= normal_concentration_bound(n, t));
  }
}

TEST_CASE("population blocks", "[theory]") {
  SECTION("null model") {
    const VarModel m = driven_pair(0.5, 0.0, -0.4);
    const PopulationBlocks b = population_blocks(m, 0, 3, 1);
    CHECK(b.theta2.isZero(0.0));
    CHECK(b.signal_D == 0.0);
    CHECK(b.surrogate_reduced == b.theta1);
    CHECK(b.v.isZero(0.0));
  }
  SECTION("independent channels have no cross covariance") {
    const VarModel m = testing::independent_ar_pair(0.6, -0.5);
    const PopulationBlocks b = population_blocks(m, 0, 4, 1);
    CHECK(b.C12.cwiseAbs().maxCoeff() < 1e-14);
    VectorXd theta2 = VectorXd::Constant(4, 0.3);
    const VectorXd surrogate = b.theta1 + b.cross * theta2;
    CHECK((surrogate - b.theta1).cwiseAbs().maxCoeff() < 1e-14);
  }
  SECTION("driven pair has positive signal") {
    const VarModel m = driven_pair(0.5, 0.8, 0.5);
    const PopulationBlocks b = population_blocks(m, 0, 2, 1);
    CHECK(b.theta1(0) == 0.5);
    CHECK(b.theta2(0) == 0.8);
    CHECK(b.signal_D > 0.0);
    CHECK(b.lambda_tilde_min > 0.0);
    CHECK_THAT(b.signal_D, WithinRel(b.theta2.dot(b.schur * b.theta2), 1e-14));
  }
  SECTION("sample Gram matrix converges to C") {
    const VarModel m = testing::random_stable_model(2, 2, 17, 0.7);
    const PopulationBlocks b = population_blocks(m, 0, 3, 1);
    const MatrixXd s = simulate(m, 1000000, 1000, 18).data;
    const DesignProblem full = build_design(s, 0, 3);
    // Same block order for two channels: target, then source.
    const MatrixXd sample = full.design.transpose() * full.design / full.n;
    CHECK((sample - b.C).cwiseAbs().maxCoeff() < 0.01 * b.C.cwiseAbs().maxCoeff());
  }
  SECTION("Schur complement is PSD for random stable models") {
    for (int i = 0; i < 50; ++i) {
      const VarModel m = testing::random_stable_model(3, 2, 300 + i, 0.9);
      const PopulationBlocks b = population_blocks(m, i % 3, 3, (i + 1) % 3);
      Eigen::SelfAdjointEigenSolver<MatrixXd> e(b.schur);
      CHECK(e.eigenvalues().minCoeff() >= -1e-10);
      CHECK((b.C - b.C.transpose()).cwiseAbs().maxCoeff() == 0.0);
    }
  }
  SECTION("rejections") {
    const VarModel m = driven_pair(0.5, 0.8, 0.5);
    CHECK_THROWS_AS(population_blocks(m, 0, 2, 0), InputError);
    CHECK_THROWS_AS(population_blocks(builtin_sim_model(), 1, 5, 0), InputError);
    // A silent channel makes C11 singular.
    MatrixXd sigma = MatrixXd::Identity(3, 3);
    sigma(2, 2) = 0.0;
    MatrixXd a1 = 0.5 * MatrixXd::Identity(3, 3);
    a1(2, 2) = 0.0;
    CHECK_THROWS_AS(population_blocks(VarModel({a1}, sigma), 0, 2, 1), NumericalError);
  }
}

TEST_CASE("theory report on models", "[theory]") {
  SECTION("built-in model gives finite positive constants") {
    const TheoryReport r = theory_report(builtin_sim_model(), 1, 11, 1000, 0, 8, {}, 0);
    CHECK(r.inputs.channels == 3);
    CHECK(r.inputs.k == 8);  // nonzeros in the y equation
    for (double v : {r.alpha, r.zeta, r.tau, r.A_const, r.lambda_n, r.delta_F,
                     r.delta_R, r.delta_D, r.a_const, r.b_const, r.c_const,
                     r.B_const, r.D_prime, r.D_tilde, r.min_n_theorem}) {
      CHECK(std::isfinite(v));
      CHECK(v > 0.0);
    }
    CHECK(r.inputs.signal_D > 0.0);
  }
  SECTION("null hypothesis never meets the alternative strength") {
    const TheoryReport r = theory_report(driven_pair(0.5, 0.0, 0.4), 0, 2, 5000, 0, 4, {}, 1);
    CHECK(r.inputs.signal_D == 0.0);
    CHECK(r.inputs.theta2_norm_sq < r.alt_strength_bound);
    CHECK(r.delta_D == 0.0);
  }
  SECTION("strong alternatives clear the deviation budget") {
    const VarModel m = driven_pair(0.5, 0.8, 0.5);
    int checked = 0;
    for (int n = 1000; n <= 100000000; n *= 10) {
      const TheoryReport r = theory_report(m, 0, 2, n, 0, 4, {}, 1);
      if (r.inputs.theta2_norm_sq >= r.alt_strength_bound && n >= r.min_n_theorem) {
        CHECK(r.inputs.signal_D > r.delta_D + r.delta_R + 7 * r.delta_F);
        CHECK(r.detectability_margin > 0.0);
        ++checked;
      }
    }
    CHECK(checked > 0);
  }
}
