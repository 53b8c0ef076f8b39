#pragma once

// JSON and CSV serialization.
//
// Model JSON:
//   {"dim": d, "order": p, "coeffs": [A_1, ..., A_p], "noise_cov": Sigma}
// with each matrix a list of rows. dim and order are optional on input but
// must agree with the matrices when present.

#include <nlohmann/json.hpp>

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "lgc/errors.hpp"
#include "lgc/experiments.hpp"
#include "lgc/gc.hpp"
#include "lgc/regression.hpp"
#include "lgc/theory.hpp"
#include "lgc/var_model.hpp"

namespace lgc {

using nlohmann::json;

namespace detail {

/// JSON has no inf/nan; non-finite values become null.
inline json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json matrix_json(const MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline MatrixXd matrix_from_json(const json& j, const std::string& what) {
  require(j.is_array() && !j.empty(), what + ": expected a nonempty list of rows");
  const std::size_t cols = j[0].is_array() ? j[0].size() : 0;
  require(cols > 0, what + ": rows must be nonempty lists");
  MatrixXd m(j.size(), cols);
  for (std::size_t r = 0; r < j.size(); ++r) {
    require(j[r].is_array() && j[r].size() == cols, what + ": ragged matrix");
    for (std::size_t c = 0; c < cols; ++c) {
      require(j[r][c].is_number(), what + ": non-numeric entry");
      m(r, c) = j[r][c].get<double>();
    }
  }
  return m;
}

inline json vector_json(const VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(num(v(i)));
  return a;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError(what + ": invalid JSON (" + e.what() + ")");
  }
}

}  // namespace detail

inline json model_to_json(const VarModel& model) {
  json j;
  j["dim"] = model.dim();
  j["order"] = model.order();
  j["coeffs"] = json::array();
  for (const auto& a : model.coeffs()) j["coeffs"].push_back(detail::matrix_json(a));
  j["noise_cov"] = detail::matrix_json(model.noise_cov());
  return j;
}

inline VarModel model_from_json(const json& j) {
  detail::require(j.is_object() && j.contains("coeffs") && j.contains("noise_cov"),
                  "model JSON needs 'coeffs' and 'noise_cov'");
  const json& cj = j["coeffs"];
  detail::require(cj.is_array(), "model JSON: 'coeffs' must be a list");
  std::vector<MatrixXd> coeffs;
  for (std::size_t i = 0; i < cj.size(); ++i) {
    coeffs.push_back(detail::matrix_from_json(cj[i], "coeffs[" + std::to_string(i) + "]"));
  }
  VarModel model(std::move(coeffs), detail::matrix_from_json(j["noise_cov"], "noise_cov"));
  auto check = [&](const char* key, int expect) {
    if (!j.contains(key)) return;
    detail::require(j[key].is_number_integer() && j[key].get<int>() == expect,
                    std::string("model JSON: '") + key + "' disagrees with the matrices");
  };
  check("dim", model.dim());
  check("order", model.order());
  return model;
}

inline VarModel load_model(const std::string& path) {
  return model_from_json(detail::parse_json(detail::read_file(path), path));
}

/// "t,ch0,ch1,..." with t the row index (oldest first).
inline std::string trajectory_csv(const MatrixXd& data) {
  std::ostringstream os;
  os << 't';
  for (Eigen::Index c = 0; c < data.cols(); ++c) os << ",ch" << c;
  os << '\n';
  for (Eigen::Index r = 0; r < data.rows(); ++r) {
    os << r;
    for (Eigen::Index c = 0; c < data.cols(); ++c) os << ',' << fmt_double(data(r, c));
    os << '\n';
  }
  return os.str();
}

inline json fit_to_json(const LassoFit& fit, const DesignProblem& problem) {
  json j;
  j["lambda"] = fit.lambda;
  j["loss"] = fit.loss;
  j["objective"] = fit.objective();
  j["converged"] = fit.converged;
  j["iterations"] = fit.iterations;
  j["kkt_violation"] = detail::num(fit.kkt_violation);
  j["n"] = problem.n;
  j["p"] = problem.p;
  j["target"] = problem.target_channel;
  j["block_channels"] = problem.block_channels;
  j["coeffs"] = detail::vector_json(fit.coeffs);
  if (fit.rank >= 0) {
    j["rank"] = fit.rank;
    j["rank_deficient"] = fit.rank_deficient;
    j["overfit"] = fit.overfit;
  }
  return j;
}

inline json gc_to_json(const GcResult& r) {
  return {{"source", r.source_channel},
          {"target", r.target_channel},
          {"n", r.n},
          {"p", r.p},
          {"lambda", r.lambda},
          {"full_loss", r.full_loss},
          {"reduced_loss", r.reduced_loss},
          {"lgc", detail::num(r.lgc)},
          {"classical_f", detail::num(r.classical_f)},
          {"interpolated", r.interpolated},
          {"untrustworthy", r.untrustworthy}};
}

inline json theory_to_json(const TheoryReport& r) {
  const TheoryInputs& in = r.inputs;
  json inputs = {{"sigma_min", in.sigma_min},
                 {"sigma_max", in.sigma_max},
                 {"sigma11", in.sigma11},
                 {"mu_max", in.mu_max},
                 {"mu_min", in.mu_min},
                 {"mu_min_companion", in.mu_min_breve},
                 {"lambda_tilde_min", in.lambda_tilde_min},
                 {"cross_norm", in.cross_norm},
                 {"v_norm2", in.v_norm2},
                 {"v_norm1", in.v_norm1},
                 {"theta2_norm_sq", in.theta2_norm_sq},
                 {"off_support_l1", in.off_support_l1},
                 {"signal_D", in.signal_D},
                 {"n", in.n},
                 {"p", in.p},
                 {"k", in.k},
                 {"m", in.m},
                 {"channels", in.channels}};
  const BoundConstants& k = r.consts;
  json consts = {{"d0", k.d0}, {"d0_prime", k.d0_prime}, {"c", k.c},
                 {"C0", k.C0}, {"D0", k.D0}, {"D0_prime", k.D0_prime},
                 {"c1", k.c1}, {"c2", k.c2}, {"c3", k.c3}, {"c4", k.c4},
                 {"d1", k.d1}, {"d2", k.d2}, {"d1_prime", k.d1_prime},
                 {"d2_prime", k.d2_prime}, {"A_override", k.A_override}};
  auto n = [](double v) { return detail::num(v); };
  return {{"inputs", inputs},
          {"constants", consts},
          {"alpha", n(r.alpha)},
          {"zeta", n(r.zeta)},
          {"tau", n(r.tau)},
          {"tau_condition", n(r.tau_condition)},
          {"n_for_tau", n(r.n_for_tau)},
          {"m", r.m},
          {"Q_full", n(r.Q_full)},
          {"Q_reduced", n(r.Q_reduced)},
          {"A_computed", n(r.A_computed)},
          {"A_const", n(r.A_const)},
          {"lambda_n", n(r.lambda_n)},
          {"delta_F", n(r.delta_F)},
          {"delta_R", n(r.delta_R)},
          {"delta_D", n(r.delta_D)},
          {"a_const", n(r.a_const)},
          {"b_const", n(r.b_const)},
          {"c_const", n(r.c_const)},
          {"B_const", n(r.B_const)},
          {"C_prime", n(r.C_prime)},
          {"C_dprime", n(r.C_dprime)},
          {"D_prime", n(r.D_prime)},
          {"D_dprime", n(r.D_dprime)},
          {"D_tilde", n(r.D_tilde)},
          {"min_n_theorem", n(r.min_n_theorem)},
          {"alt_strength_bound", n(r.alt_strength_bound)},
          {"K1", n(r.K1)},
          {"K2", n(r.K2)},
          {"c_bar", n(r.c_bar)},
          {"d_bar", n(r.d_bar)},
          {"failure_probability", n(r.failure_probability)},
          {"diagnostics",
           {{"full_l2_bound", n(r.full_l2_bound)},
            {"full_l1_bound", n(r.full_l1_bound)},
            {"full_prediction_bound", n(r.full_prediction_bound)},
            {"reduced_l2_bound", n(r.reduced_l2_bound)},
            {"reduced_l1_bound", n(r.reduced_l1_bound)},
            {"reduced_prediction_bound", n(r.reduced_prediction_bound)},
            {"detectability_margin", n(r.detectability_margin)}}}};
}

inline BoundConstants bound_constants_from_json(const json& j) {
  BoundConstants k;
  auto get = [&](const char* key, double& dst) {
    if (j.contains(key)) {
      detail::require(j[key].is_number(), std::string("constants: '") + key +
                                              "' must be a number");
      dst = j[key].get<double>();
    }
  };
  get("d0", k.d0);
  get("d0_prime", k.d0_prime);
  get("c", k.c);
  get("C0", k.C0);
  get("D0", k.D0);
  get("D0_prime", k.D0_prime);
  get("c1", k.c1);
  get("c2", k.c2);
  get("c3", k.c3);
  get("c4", k.c4);
  get("d1", k.d1);
  get("d2", k.d2);
  get("d1_prime", k.d1_prime);
  get("d2_prime", k.d2_prime);
  get("A_override", k.A_override);
  return k;
}

inline json sweep_config_to_json(const SweepConfig& c) {
  return {{"model", c.model_source},
          {"sweep_variable", to_string(c.variable)},
          {"values", c.values},
          {"n", c.n},
          {"p", c.p},
          {"lambda_mode", c.cross_validate ? "cv" : "fixed"},
          {"lambda", c.lambda},
          {"cv_folds", c.cv_folds},
          {"cv_grid", c.cv_grid},
          {"cv_ratio", c.cv_ratio},
          {"trials", c.trials},
          {"seed_base", c.seed_base},
          {"fpr_level", c.fpr_level},
          {"t0", c.t0},
          {"burn_in", c.burn_in},
          {"source", c.source},
          {"target", c.target},
          {"threads", c.threads}};
}

inline SweepConfig sweep_config_from_json(const json& j) {
  detail::require(j.is_object(), "sweep config must be a JSON object");
  const json defaults = sweep_config_to_json(SweepConfig{});
  for (auto it = j.begin(); it != j.end(); ++it) {
    detail::require(defaults.contains(it.key()),
                    "sweep config: unknown key '" + it.key() + "'");
  }
  SweepConfig c;
  try {
    c.model_source = j.value("model", c.model_source);
    c.variable = parse_sweep_variable(j.value("sweep_variable", std::string(to_string(c.variable))));
    c.values = j.value("values", c.values);
    c.n = j.value("n", c.n);
    c.p = j.value("p", c.p);
    const std::string mode = j.value("lambda_mode", std::string("cv"));
    detail::require(mode == "cv" || mode == "fixed",
                    "sweep config: lambda_mode must be 'cv' or 'fixed'");
    c.cross_validate = mode == "cv";
    c.lambda = j.value("lambda", c.lambda);
    c.cv_folds = j.value("cv_folds", c.cv_folds);
    c.cv_grid = j.value("cv_grid", c.cv_grid);
    c.cv_ratio = j.value("cv_ratio", c.cv_ratio);
    c.trials = j.value("trials", c.trials);
    c.seed_base = j.value("seed_base", c.seed_base);
    c.fpr_level = j.value("fpr_level", c.fpr_level);
    c.t0 = j.value("t0", c.t0);
    c.burn_in = j.value("burn_in", c.burn_in);
    c.source = j.value("source", c.source);
    c.target = j.value("target", c.target);
    c.threads = j.value("threads", c.threads);
  } catch (const json::type_error& e) {
    throw InputError(std::string("sweep config: wrong value type (") + e.what() + ")");
  }
  validate(c);
  return c;
}

}  // namespace lgc
