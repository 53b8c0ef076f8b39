#include <catch_amalgamated.hpp>

#include <boost/math/quadrature/exp_sinh.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "support.hpp"

using namespace lgc;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

LassoFit fit_with_loss(double loss, double lambda = 0.0) {
  LassoFit f;
  f.loss = loss;
  f.lambda = lambda;
  f.coeffs = VectorXd::Zero(1);
  return f;
}

DesignProblem two_channel_problem(int rows, int p, std::uint64_t seed) {
  GaussianStream g(seed);
  return build_design(testing::gaussian_matrix(g, rows, 2), 0, p);
}

double chi2_sf_quadrature(double x, int k) {
  const double lognorm = -0.5 * k * std::log(2.0) - std::lgamma(0.5 * k);
  auto pdf = [&](double t) {
    return std::exp(lognorm + (0.5 * k - 1) * std::log(t) - 0.5 * t);
  };
  boost::math::quadrature::exp_sinh<double> integrator;
  return integrator.integrate([&](double u) { return pdf(x + u); }, 1e-14);
}

}  // namespace

TEST_CASE("lgc statistic", "[gc]") {
  const DesignProblem prob = two_channel_problem(40, 2, 1);
  SECTION("equal losses give zero") {
    const GcResult r = lgc_statistic(prob, 1, fit_with_loss(0.7), fit_with_loss(0.7));
    CHECK(r.lgc == 0.0);
    CHECK(r.classical_f == 0.0);
  }
  SECTION("ratio and log ratio") {
    const GcResult r = lgc_statistic(prob, 1, fit_with_loss(0.5), fit_with_loss(0.8));
    CHECK_THAT(r.lgc, WithinAbs(0.6, 1e-15));
    CHECK_THAT(r.classical_f, WithinAbs(std::log(1.6), 1e-15));
    CHECK(r.source_channel == 1);
    CHECK(r.target_channel == 0);
    CHECK(r.n == prob.n);
    CHECK(r.p == 2);
  }
  SECTION("mismatched penalties and bad channels are rejected") {
    CHECK_THROWS_AS(lgc_statistic(prob, 1, fit_with_loss(1, 0.1), fit_with_loss(1, 0.2)),
                    InputError);
    CHECK_THROWS_AS(lgc_statistic(prob, 0, fit_with_loss(1), fit_with_loss(1)), InputError);
    CHECK_THROWS_AS(lgc_statistic(prob, 5, fit_with_loss(1), fit_with_loss(1)), InputError);
  }
  SECTION("interpolating full model") {
    const GcResult inf = lgc_statistic(prob, 1, fit_with_loss(0.0), fit_with_loss(0.3));
    CHECK(inf.interpolated);
    CHECK(std::isinf(inf.lgc));
    const GcResult nan = lgc_statistic(prob, 1, fit_with_loss(0.0), fit_with_loss(0.0));
    CHECK(std::isnan(nan.lgc));
    CHECK_THROWS_AS(classical_gc_test(inf), NumericalError);
  }
}

TEST_CASE("identity between the two measures on fitted data", "[gc]") {
  for (int i = 0; i < 40; ++i) {
    const DesignProblem prob = two_channel_problem(120, 1 + i % 6, 10 + i);
    const LambdaChoice choice =
        i % 2 == 0 ? LambdaChoice::fixed(0.0) : LambdaChoice::fixed(0.05 * lambda_max(prob));
    const GcResult r = gc_from_design(prob, 1, choice).result;
    REQUIRE(std::isfinite(r.classical_f));
    CHECK(std::abs(r.lgc - std::expm1(r.classical_f)) <= 1e-12);
    if (choice.value == 0.0) {
      // Nested least squares never fits worse with more regressors.
      CHECK(r.lgc >= 0.0);
    }
  }
}

TEST_CASE("conditional statistic", "[gc]") {
  GaussianStream g(77);
  SECTION("two channels reduce to the pairwise pipeline") {
    const MatrixXd s = testing::gaussian_matrix(g, 200, 2);
    const DesignProblem full = build_design(s, 0, 3);
    const double lambda = 0.02;
    const GcResult a = conditional_lgc(s, 0, 1, 3, lambda);
    const GcResult b = gc_from_design(full, 1, LambdaChoice::fixed(lambda)).result;
    CHECK(a.lgc == b.lgc);
  }
  SECTION("channel order of the conditioning set does not matter") {
    const VarModel m = testing::random_stable_model(4, 2, 78);
    const MatrixXd s = simulate(m, 300, 200, 79).data;
    Eigen::PermutationMatrix<Eigen::Dynamic> perm(4);
    perm.indices() << 0, 1, 3, 2;  // swap the two conditioning channels
    const MatrixXd swapped = s * perm;
    for (double lambda : {0.0, 0.01, 0.05}) {
      const GcResult a = conditional_lgc(s, 0, 1, 4, lambda);
      const GcResult b = conditional_lgc(swapped, 0, 1, 4, lambda);
      CHECK_THAT(a.lgc, WithinAbs(b.lgc, 1e-10));
    }
  }
  SECTION("invalid arguments") {
    const MatrixXd s = testing::gaussian_matrix(g, 50, 3);
    CHECK_THROWS_AS(conditional_lgc(s, 1, 1, 2, 0.0), InputError);
    CHECK_THROWS_AS(conditional_lgc(s, 1, 3, 2, 0.0), InputError);
    CHECK_THROWS_AS(conditional_lgc(s.leftCols(1), 0, 1, 2, 0.0), InputError);
  }
}

TEST_CASE("chi-square survival function", "[gc]") {
  for (int k : {1, 2, 7, 100}) CHECK(chi2_sf(0.0, k) == 1.0);
  CHECK_THAT(chi2_sf(3.841, 1), WithinAbs(0.05, 1e-3));
  // 2 (1 - Phi(1.96)) with 1.96^2 = 3.8416.
  CHECK_THAT(chi2_sf(3.8416, 1), WithinAbs(std::erfc(1.96 / std::sqrt(2.0)), 1e-12));
  for (double x : {0.1, 1.0, 5.0, 30.0}) {
    CHECK_THAT(chi2_sf(x, 2), WithinAbs(std::exp(-x / 2), 1e-12));
  }
  // Reference value from an independent incomplete-gamma implementation.
  CHECK_THAT(chi2_sf(127.3, 100), WithinAbs(0.03403988104169654, 1e-10));
  for (int k : {1, 2, 5, 10, 100}) {
    for (double x : {0.05, 0.5, 1.0, 3.0, 10.0, 50.0, 120.0, 200.0}) {
      CHECK_THAT(chi2_sf(x, k), WithinAbs(chi2_sf_quadrature(x, k), 1e-8));
    }
  }
  CHECK_THROWS_AS(chi2_sf(-1.0, 3), InputError);
  CHECK_THROWS_AS(chi2_sf(1.0, 0), InputError);
}

TEST_CASE("classical test", "[gc]") {
  GcResult r;
  r.n = 500;
  r.p = 10;
  r.classical_f = 0.0;
  CHECK(classical_gc_test(r).p_value == 1.0);
  r.classical_f = 127.3 / 500;
  r.p = 100;
  const Chi2Test t = classical_gc_test(r);
  CHECK_THAT(t.statistic, WithinAbs(127.3, 1e-12));
  CHECK(t.dof == 100);
  CHECK_THAT(t.p_value, WithinAbs(0.0340, 1e-4));
  CHECK(t.warning.empty());
  r.lambda = 0.1;
  CHECK_FALSE(classical_gc_test(r).warning.empty());
  // p-values fall as the statistic grows.
  double prev = 1.0;
  for (double f = 0.01; f < 1.0; f += 0.05) {
    r.classical_f = f;
    const double pv = classical_gc_test(r).p_value;
    CHECK(pv <= prev);
    CHECK(pv >= 0.0);
    prev = pv;
  }
}

TEST_CASE("false-positive bound", "[gc]") {
  SECTION("closed form values") {
    const double s = std::sqrt(std::log(200.0) / 1280);
    const double gamma = 2.0096 / 0.0096;
    const double expect =
        2 * std::exp(-1280 / (8 * std::pow(1 + gamma * 0.25 * s, 2)));
    CHECK_THAT(fp_probability(0.0096, 1280, 100, 0.25), WithinRel(expect, 1e-14));
    CHECK_THAT(fp_probability(0.0096, 1280, 100, 0.25), WithinRel(4.55e-4, 0.01));
    const double limit =
        2 * std::exp(-1280 / (8 * std::pow(1 + 0.25 * s, 2)));
    CHECK_THAT(fp_probability(1e12, 1280, 100, 0.25), WithinRel(limit, 1e-9));
  }
  SECTION("raw bound is reported unclamped") {
    const FpBound b = fp_bound(0.01, 20, 100, 0.25);
    CHECK(b.raw > 1.0);
    CHECK(b.raw <= 2.0);
    CHECK(b.clamped == 1.0);
  }
  SECTION("monotone in every argument") {
    for (int p : {5, 50, 100}) {
      for (double t0 : {0.1, 0.25, 2.0}) {
        for (int n : {500, 1000, 4000}) {
          double prev = 3.0;
          for (double t = 0.01; t < 5; t *= 1.7) {
            const double b = fp_bound(t, n, p, t0).raw;
            CHECK(b < prev);
            prev = b;
            CHECK(fp_bound(t, 2 * n, p, t0).raw < b);
            CHECK(fp_bound(t, n, 2 * p, t0).raw > b);
            CHECK(fp_bound(t, n, p, 1.5 * t0).raw > b);
          }
        }
      }
    }
  }
  SECTION("p-value convention") {
    CHECK(lgc_p_value(0.0, 1000, 10, 0.25) == 1.0);
    CHECK(lgc_p_value(-0.1, 1000, 10, 0.25) == 1.0);
    CHECK(lgc_p_value(0.3, 1000, 10, 0.25) == fp_probability(0.3, 1000, 10, 0.25));
  }
  SECTION("invalid arguments") {
    CHECK_THROWS_AS(fp_probability(0.0, 100, 10, 0.25), InputError);
    CHECK_THROWS_AS(fp_probability(0.1, 100, 10, 0.0), InputError);
    CHECK_THROWS_AS(fp_probability(0.1, 0, 10, 0.25), InputError);
  }
}

TEST_CASE("threshold inversion", "[gc]") {
  SECTION("round trip on random feasible tuples") {
    GaussianStream g(99);
    int checked = 0;
    while (checked < 100) {
      const int n = 200 + static_cast<int>(g.uniform() * 5000);
      const int p = 1 + static_cast<int>(g.uniform() * 200);
      const double t0 = 0.05 + g.uniform() * 2;
      const double t = std::exp(-5 + 7 * g.uniform());
      const double fp = fp_probability(t, n, p, t0);
      if (!(fp > 0.0 && fp < 1.0)) continue;
      const ThresholdRule rule = threshold_for_fpr(fp, n, p, t0);
      CHECK_THAT(rule.threshold, WithinRel(t, 1e-8));
      CHECK_THAT(rule.fp_bound, WithinRel(fp, 1e-10));
      CHECK(rule.gamma > 1.0);
      ++checked;
    }
  }
  SECTION("plotted threshold for n = 300") {
    const ThresholdRule rule = threshold_for_fpr(0.01, 300, 100, 2.0);
    CHECK(rule.threshold > 0.0);
    CHECK(std::isfinite(rule.threshold));
    CHECK_THAT(fp_probability(rule.threshold, 300, 100, 2.0), WithinRel(0.01, 1e-10));
  }
  SECTION("vacuous level") {
    const ThresholdRule rule = threshold_for_fpr(2.5, 100, 10, 0.25);
    CHECK(rule.threshold == 0.0);
    CHECK(std::isinf(rule.gamma));
  }
  SECTION("infeasible sizes name the minimal n") {
    try {
      threshold_for_fpr(0.01, 30, 100, 0.25);
      FAIL("expected an infeasible threshold");
    } catch (const InfeasibleThreshold& e) {
      const long m = e.min_n();
      CHECK(m > 30);
      CHECK_NOTHROW(threshold_for_fpr(0.01, static_cast<int>(m), 100, 0.25));
      CHECK_THROWS_AS(threshold_for_fpr(0.01, static_cast<int>(m - 1), 100, 0.25),
                      InfeasibleThreshold);
    }
  }
}

TEST_CASE("corollary sampling requirement", "[gc]") {
  // Unit constants: 2 max{1, 2} log(2p).
  for (int p : {1, 10, 100}) {
    CHECK(corollary_sampling_requirement(1, p, 1, 1, 1) ==
          static_cast<std::int64_t>(std::ceil(4 * std::log(2.0 * p))));
  }
  // Constants of the worked example: D = 10.67, t0 = 2, threshold 0.114.
  const double gamma = (0.114 + 2) / 0.114;
  CHECK_THAT(gamma, WithinAbs(18.54, 0.01));
  CHECK_THAT(10.67 * 10.67 / 4, WithinAbs(28.46, 0.01));
  CHECK_THAT(2 * 10.67 * gamma, WithinRel(396, 0.005));
  const double log2p = std::log(200.0);
  CHECK(corollary_sampling_requirement(1, 100, 2, gamma, 10.67) ==
        static_cast<std::int64_t>(std::ceil(2 * 2 * 10.67 * gamma * log2p)));
  CHECK(corollary_sampling_requirement(20, 100, 2, gamma, 10.67) ==
        static_cast<std::int64_t>(std::ceil(2 * 10.67 * 10.67 * 400 / 4 * log2p)));
  // Past k = 2 gamma t0^2 / D the requirement is quadratic in k.
  const int kc = static_cast<int>(std::ceil(2 * gamma * 4 / 10.67)) + 1;
  const double r1 = double(corollary_sampling_requirement(kc, 100, 2, gamma, 10.67));
  const double r2 = double(corollary_sampling_requirement(2 * kc, 100, 2, gamma, 10.67));
  CHECK_THAT(r2 / r1, WithinRel(4.0, 1e-3));
}

TEST_CASE("simulated forward effect dominates the reverse one", "[gc][slow]") {
  SweepConfig c;
  c.values = {1000};
  c.trials = 30;
  c.threads = 1;
  const SweepResult res = run_sweep(builtin_sim_model(), c);
  REQUIRE(res.summary.size() == 1);
  const SweepSummaryRow& row = res.summary[0];
  CHECK(row.forward.median >= 5 * row.reverse.median);
  for (const auto& rec : res.records) {
    CHECK(rec.lambda_forward > 0.0);
  }
}

TEST_CASE("null calibration of the classical statistic", "[gc][slow]") {
  // Independent AR channels, least squares, n = 2000, p = 5.
  const VarModel m = testing::independent_ar_pair();
  std::vector<double> stats;
  for (int trial = 0; trial < 500; ++trial) {
    const MatrixXd s = simulate(m, 2000 + 5 - 1, 200, 10000 + trial).data;
    const DesignProblem full = build_design(s, 0, 5);
    REQUIRE(full.n == 2000);
    const GcResult r = gc_from_design(full, 1, LambdaChoice::fixed(0.0)).result;
    stats.push_back(r.n * r.classical_f);
  }
  std::sort(stats.begin(), stats.end());
  double ks = 0.0;
  const double n = stats.size();
  for (std::size_t i = 0; i < stats.size(); ++i) {
    const double cdf = 1.0 - chi2_sf(std::max(stats[i], 0.0), 5);
    ks = std::max({ks, std::abs(cdf - i / n), std::abs((i + 1) / n - cdf)});
  }
  // Exact one-sample Kolmogorov-Smirnov critical value, n = 500, level 0.01.
  CHECK(ks < 0.07243);
}

TEST_CASE("conditioning on the observed confounder", "[gc][slow]") {
  // All three channels observed, n = 1000, p = 100, penalty from
  // cross-validating the full model. The forward link survives conditioning
  // and the typical reverse statistic sits below the 0.01 threshold; the
  // per-trial rate is reported by the acceptance binary.
  const VarModel model = builtin_sim_model();
  const int n = 1000, p = 100;
  const double thr = threshold_for_fpr(0.01, n, p, kDefaultT0, 3).threshold;
  std::vector<double> reverse;
  for (int trial = 0; trial < 10; ++trial) {
    const MatrixXd s = simulate(model, n + p - model.order(), kDefaultBurnIn, 1 + trial).data;
    const DesignProblem to_y = build_design(s, 1, p);
    const double ly = choose_lambda(to_y, LambdaChoice::cross_validated());
    CHECK(conditional_lgc(s, 1, 0, p, ly).lgc > thr);
    const DesignProblem to_x = build_design(s, 0, p);
    const double lx = choose_lambda(to_x, LambdaChoice::cross_validated());
    reverse.push_back(conditional_lgc(s, 0, 1, p, lx).lgc);
  }
  CHECK(hull_of(reverse).median < thr);
}
