// Command-line front end.
//
// Exit codes: 0 success, 2 input error (including bad arguments),
// 3 numerical failure.

#include <CLI11/CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "lgc/lgc.hpp"

namespace {

using lgc::json;

struct SimulateArgs {
  std::string model = "builtin";
  int n = 1000;
  int burn_in = lgc::kDefaultBurnIn;
  std::uint64_t seed = 1;
  std::string out;
};

struct RegressionArgs {
  std::string data;
  std::vector<std::string> columns;
  int target = 1;
  int source = 0;
  int order = 10;
  double lambda = -1.0;  // < 0 selects cross-validation
  int folds = 5;
  double t0 = lgc::kDefaultT0;
  double fpr = lgc::kDefaultFpr;
  bool zscore = false;
  std::string out;
};

struct SweepArgs {
  std::string config;
  std::string out_dir = ".";
  int threads = 0;
};

struct TheoryArgs {
  std::string model = "builtin";
  std::string constants;
  int target = 1;
  int source = 0;
  int order = 11;
  int n = 1000;
  int k = 0;
  double m = 8.0;
  double a_override = 0.0;
  std::string out;
};

struct SpikeArgs {
  std::string events;
  double bin_width = 0.04;
  double t_start = 0.0;
  double t_end = 0.0;
  std::string out;
};

json defaults_json() {
  const SimulateArgs s;
  const RegressionArgs r;
  const TheoryArgs t;
  const SpikeArgs b;
  const lgc::BoundConstants k;
  return {
      {"simulate",
       {{"model", s.model}, {"n", s.n}, {"burn_in", s.burn_in}, {"seed", s.seed}}},
      {"fit",
       {{"target", r.target}, {"order", r.order}, {"lambda", "cv"},
        {"folds", r.folds}, {"cv_grid", 50}, {"cv_ratio", 1e-4},
        {"center", true}, {"zscore", r.zscore}}},
      {"gc",
       {{"target", r.target}, {"source", r.source}, {"order", r.order},
        {"lambda", "cv"}, {"folds", r.folds}, {"t0", r.t0}, {"fpr", r.fpr}}},
      {"sweep", lgc::sweep_config_to_json(lgc::SweepConfig{})},
      {"theory",
       {{"model", t.model}, {"target", t.target}, {"source", t.source},
        {"order", t.order}, {"n", t.n}, {"k", "nonzeros"}, {"m", t.m},
        {"constants",
         {{"d0", k.d0}, {"d0_prime", k.d0_prime}, {"c", k.c}, {"C0", k.C0},
          {"D0", k.D0}, {"D0_prime", k.D0_prime}, {"c1", k.c1}, {"c2", k.c2},
          {"c3", k.c3}, {"c4", k.c4}, {"d1", k.d1}, {"d2", k.d2},
          {"d1_prime", k.d1_prime}, {"d2_prime", k.d2_prime}}}}},
      {"bin-spikes", {{"bin_width", b.bin_width}, {"t_start", b.t_start}}},
      {"lasso",
       {{"tol", lgc::LassoOptions{}.tol},
        {"kkt_tol", lgc::LassoOptions{}.kkt_tol},
        {"max_sweeps", lgc::LassoOptions{}.max_sweeps}}}};
}

lgc::VarModel resolve_model(const std::string& source) {
  return source == "builtin" ? lgc::builtin_sim_model() : lgc::load_model(source);
}

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw lgc::InputError("cannot write '" + path + "'");
  out << text;
}

lgc::LambdaChoice lambda_choice(const RegressionArgs& a) {
  if (a.lambda >= 0.0) return lgc::LambdaChoice::fixed(a.lambda);
  return lgc::LambdaChoice::cross_validated(a.folds);
}

lgc::MatrixXd load_series(const RegressionArgs& a) {
  lgc::IngestOptions opt;
  opt.columns = a.columns;
  opt.zscore = a.zscore;
  return lgc::ingest_csv(a.data, opt).data;
}

void run_simulate(const SimulateArgs& a) {
  const lgc::VarModel model = resolve_model(a.model);
  const lgc::Trajectory traj = lgc::simulate(model, a.n, a.burn_in, a.seed);
  write_output(a.out, lgc::trajectory_csv(traj.data));
}

void run_fit(const RegressionArgs& a) {
  const lgc::MatrixXd series = load_series(a);
  const lgc::DesignProblem problem = lgc::build_design(series, a.target, a.order);
  const double lambda = lgc::choose_lambda(problem, lambda_choice(a));
  const lgc::LassoFit fit = lgc::fit_penalized(problem, lambda);
  write_output(a.out, lgc::fit_to_json(fit, problem).dump(2) + "\n");
}

void run_gc(const RegressionArgs& a) {
  const lgc::MatrixXd series = load_series(a);
  const lgc::DesignProblem full = lgc::build_design(series, a.target, a.order);
  const lgc::GcResult lasso =
      lgc::gc_from_design(full, a.source, lambda_choice(a)).result;
  const lgc::GcResult ols =
      lgc::gc_from_design(full, a.source, lgc::LambdaChoice::fixed(0.0)).result;
  lgc::PairOptions opt;
  opt.t0 = a.t0;
  opt.fpr = a.fpr;
  const lgc::PairRow row = lgc::detail::pair_row(lasso, ols, opt);
  std::string text = std::string(lgc::kPairCsvHeader) + ",detected\n" +
                     lgc::pair_csv_row(row) + "," + (row.detected ? "1" : "0") + "\n";
  write_output(a.out, text);
  if (lasso.untrustworthy || ols.untrustworthy) {
    std::cerr << "warning: least-squares fit is rank deficient or "
                 "over-parameterized; classical_f is not meaningful\n";
  }
}

void run_sweep_cmd(const SweepArgs& a) {
  const json j = lgc::detail::parse_json(lgc::detail::read_file(a.config), a.config);
  lgc::SweepConfig cfg = lgc::sweep_config_from_json(j);
  if (a.threads > 0) cfg.threads = a.threads;
  const lgc::VarModel model = resolve_model(cfg.model_source);
  const lgc::SweepResult res = lgc::run_sweep(model, cfg);

  std::filesystem::create_directories(a.out_dir);
  const std::filesystem::path dir(a.out_dir);
  write_output((dir / "records.csv").string(), lgc::records_csv(res.records));
  write_output((dir / "summary.csv").string(), lgc::summary_csv(res.summary));
  lgc::PlotOptions plot;
  plot.x_label = lgc::to_string(cfg.variable);
  plot.log_x = cfg.variable == lgc::SweepVariable::lambda;
  plot.title = std::string("LGC statistic vs ") + lgc::to_string(cfg.variable);
  write_output((dir / "sweep.svg").string(), lgc::render_sweep_svg(res.summary, plot));
  std::cout << lgc::summary_csv(res.summary);
}

void run_theory(const TheoryArgs& a) {
  const lgc::VarModel model = resolve_model(a.model);
  lgc::BoundConstants consts;
  if (!a.constants.empty()) {
    consts = lgc::bound_constants_from_json(
        lgc::detail::parse_json(lgc::detail::read_file(a.constants), a.constants));
  }
  if (a.a_override > 0.0) consts.A_override = a.a_override;
  const lgc::TheoryReport r =
      lgc::theory_report(model, a.target, a.order, a.n, a.k, a.m, consts, a.source);
  if (!a.out.empty()) write_output(a.out, lgc::theory_to_json(r).dump(2) + "\n");

  const std::pair<const char*, double> rows[] = {
      {"alpha", r.alpha},         {"zeta", r.zeta},
      {"tau", r.tau},             {"Q", r.Q_full},
      {"Q'", r.Q_reduced},        {"A", r.A_const},
      {"lambda_n", r.lambda_n},   {"Delta_F", r.delta_F},
      {"Delta_R", r.delta_R},     {"Delta_D", r.delta_D},
      {"a", r.a_const},           {"b", r.b_const},
      {"c", r.c_const},           {"B", r.B_const},
      {"C'", r.C_prime},          {"D'", r.D_prime},
      {"D~", r.D_tilde},          {"min n", r.min_n_theorem},
      {"B k log(2p)/n", r.alt_strength_bound},
      {"signal D", r.inputs.signal_D},
      {"detectability margin", r.detectability_margin}};
  for (const auto& [name, value] : rows) {
    std::printf("%-22s %.6g\n", name, value);
  }
}

void run_bin_spikes(const SpikeArgs& a) {
  lgc::IngestOptions opt;
  opt.center = false;
  const lgc::IngestedData ev = lgc::ingest_csv(a.events, opt);
  lgc::detail::require(ev.data.cols() == 2,
                       "bin-spikes: expected two columns (unit, time)");
  std::map<long, std::vector<double>> by_unit;
  double last = 0.0;
  for (Eigen::Index r = 0; r < ev.data.rows(); ++r) {
    by_unit[std::lround(ev.data(r, 0))].push_back(ev.data(r, 1));
    last = std::max(last, ev.data(r, 1));
  }
  std::vector<std::vector<double>> units;
  for (auto& [id, times] : by_unit) {
    std::sort(times.begin(), times.end());
    units.push_back(std::move(times));
  }
  const double t_end = a.t_end > a.t_start ? a.t_end : last;
  const lgc::Psth psth = lgc::bin_spikes(units, a.bin_width, a.t_start, t_end);
  std::string text = "t,rate\n";
  for (std::size_t b = 0; b < psth.rate.size(); ++b) {
    text += lgc::fmt_double(a.t_start + b * a.bin_width) + "," +
            lgc::fmt_double(psth.rate[b]) + "\n";
  }
  write_output(a.out, text);
  if (psth.ignored > 0) {
    std::cerr << psth.ignored << " events outside [" << a.t_start << ", " << t_end
              << "] ignored\n";
  }
}

void add_regression_options(CLI::App* cmd, RegressionArgs& a, bool with_source) {
  cmd->add_option("--data", a.data, "CSV with one column per channel")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--columns", a.columns, "Channel column names (default: all but t)")
      ->delimiter(',');
  cmd->add_option("--target", a.target, "Target channel index")->capture_default_str();
  if (with_source) {
    cmd->add_option("--source", a.source, "Source channel index")->capture_default_str();
  }
  cmd->add_option("--order", a.order, "Lags per channel")->capture_default_str();
  auto* lam = cmd->add_option("--lambda", a.lambda, "Fixed penalty (0 = least squares)");
  auto* cv = cmd->add_flag("--cv", "Choose the penalty by cross-validation (default)");
  lam->excludes(cv);
  cmd->add_option("--folds", a.folds, "Cross-validation folds")->capture_default_str();
  cmd->add_flag("--zscore", a.zscore, "Scale channels to unit variance");
  cmd->add_option("-o,--out", a.out, "Output file (default stdout)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LASSO-based Granger causality toolkit"};
  app.require_subcommand(0, 1);
  bool show_config = false;
  app.add_flag("--show-config", show_config, "Print every default as JSON and exit");

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "Simulate a VAR model to CSV");
  c_sim->add_option("--model", sim.model, "Model JSON path or 'builtin'")->capture_default_str();
  c_sim->add_option("-n", sim.n, "Samples after the initial lags")->capture_default_str();
  c_sim->add_option("--burn-in", sim.burn_in, "Discarded warm-up samples")->capture_default_str();
  c_sim->add_option("--seed", sim.seed, "Random seed")->capture_default_str();
  c_sim->add_option("-o,--out", sim.out, "Output CSV (default stdout)");

  RegressionArgs fit;
  auto* c_fit = app.add_subcommand("fit", "Fit one target's lagged regression");
  add_regression_options(c_fit, fit, false);

  RegressionArgs gc;
  auto* c_gc = app.add_subcommand("gc", "Granger-causality statistic for one direction");
  add_regression_options(c_gc, gc, true);
  c_gc->add_option("--t0", gc.t0, "Bound parameter t0")->capture_default_str();
  c_gc->add_option("--fpr", gc.fpr, "Detection level")->capture_default_str();

  SweepArgs sw;
  auto* c_sweep = app.add_subcommand("sweep", "Run a simulation sweep");
  c_sweep->add_option("--config", sw.config, "Sweep config JSON")
      ->required()
      ->check(CLI::ExistingFile);
  c_sweep->add_option("--out-dir", sw.out_dir, "Directory for CSV and SVG")->capture_default_str();
  c_sweep->add_option("--threads", sw.threads, "Worker threads (0 = all cores)");

  TheoryArgs th;
  auto* c_th = app.add_subcommand("theory", "Evaluate the bound constants for a model");
  c_th->add_option("--model", th.model, "Model JSON path or 'builtin'")->capture_default_str();
  c_th->add_option("--constants", th.constants, "JSON with absolute constants");
  c_th->add_option("--target", th.target)->capture_default_str();
  c_th->add_option("--source", th.source)->capture_default_str();
  c_th->add_option("--order", th.order, "Lags per channel (>= model order)")->capture_default_str();
  c_th->add_option("-n", th.n, "Sample size")->capture_default_str();
  c_th->add_option("-k", th.k, "Sparsity (0 = count true nonzeros)")->capture_default_str();
  c_th->add_option("-m", th.m, "Curvature slack m > 1")->capture_default_str();
  c_th->add_option("--A", th.a_override, "Use this A instead of max{Q, Q'}");
  c_th->add_option("-o,--out", th.out, "Write the full report as JSON");

  SpikeArgs sp;
  auto* c_sp = app.add_subcommand("bin-spikes", "Bin spike events into a PSTH");
  c_sp->add_option("--events", sp.events, "CSV with columns unit,time")
      ->required()
      ->check(CLI::ExistingFile);
  c_sp->add_option("--bin-width", sp.bin_width, "Bin width in seconds")->capture_default_str();
  c_sp->add_option("--t-start", sp.t_start)->capture_default_str();
  c_sp->add_option("--t-end", sp.t_end, "Default: last event");
  c_sp->add_option("-o,--out", sp.out, "Output CSV (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (show_config) {
      std::cout << defaults_json().dump(2) << "\n";
      return 0;
    }
    if (c_sim->parsed()) {
      run_simulate(sim);
    } else if (c_fit->parsed()) {
      run_fit(fit);
    } else if (c_gc->parsed()) {
      run_gc(gc);
    } else if (c_sweep->parsed()) {
      run_sweep_cmd(sw);
    } else if (c_th->parsed()) {
      run_theory(th);
    } else if (c_sp->parsed()) {
      run_bin_spikes(sp);
    } else {
      std::cout << app.help();
    }
  } catch (const lgc::InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const lgc::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
