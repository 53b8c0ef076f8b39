#pragma once

// Simulation sweeps, data ingestion and report output.

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "lgc/errors.hpp"
#include "lgc/gc.hpp"
#include "lgc/regression.hpp"
#include "lgc/var_model.hpp"

namespace lgc {

/// Three channels (x, y, z), order 11. x drives y at lags 2, 3 and 11; z is a
/// common driver of both that the bivariate analysis never sees.
inline VarModel builtin_sim_model() {
  constexpr int x = 0, y = 1, z = 2;
  std::vector<MatrixXd> a(11, MatrixXd::Zero(3, 3));
  auto set = [&](int lag, int row, int col, double v) { a[lag - 1](row, col) = v; };
  set(1, x, x, -0.67);
  set(5, x, x, 0.2);
  set(11, x, x, -0.1);
  set(3, x, z, 0.05);
  set(1, y, y, -0.62);
  set(5, y, y, 0.1);
  set(11, y, y, -0.2);
  set(2, y, x, -0.1);
  set(3, y, x, -0.1);
  set(11, y, x, 0.5);
  set(4, y, z, -0.001);
  set(5, y, z, -0.004);
  set(2, z, z, -0.9025);
  MatrixXd sigma = MatrixXd::Identity(3, 3);
  sigma(y, y) = 0.6;
  return VarModel(std::move(a), std::move(sigma));
}

enum class SweepVariable { lambda, n, p };

inline const char* to_string(SweepVariable v) {
  switch (v) {
    case SweepVariable::lambda: return "lambda";
    case SweepVariable::n: return "n";
    case SweepVariable::p: return "p";
  }
  return "?";
}

inline SweepVariable parse_sweep_variable(const std::string& s) {
  if (s == "lambda") return SweepVariable::lambda;
  if (s == "n") return SweepVariable::n;
  if (s == "p") return SweepVariable::p;
  throw InputError("unknown sweep variable '" + s + "' (lambda, n or p)");
}

struct SweepConfig {
  /// "builtin" or a path to a model JSON file; resolved by the caller.
  std::string model_source = "builtin";
  SweepVariable variable = SweepVariable::n;
  std::vector<double> values{250, 500, 750, 1000};
  int n = 250;
  int p = 100;
  double lambda = 0.0;  // fixed mode (and non-lambda sweeps); 0 = OLS
  bool cross_validate = true;
  int cv_folds = 5;
  int cv_grid = 50;
  double cv_ratio = 1e-4;
  int trials = 30;
  std::uint64_t seed_base = 1;
  double fpr_level = kDefaultFpr;
  double t0 = kDefaultT0;
  int burn_in = kDefaultBurnIn;
  /// Channels handed to the analysis; everything else stays latent.
  int source = 0;
  int target = 1;
  int threads = 0;  // 0 = hardware concurrency
};

inline void validate(const SweepConfig& c) {
  detail::require(!c.values.empty(), "sweep: values must be nonempty");
  detail::require(std::is_sorted(c.values.begin(), c.values.end()),
                  "sweep: values must be sorted ascending");
  detail::require(c.trials >= 1, "sweep: trials must be >= 1");
  detail::require(c.source != c.target && c.source >= 0 && c.target >= 0,
                  "sweep: source and target must be distinct channels");
  detail::require(c.fpr_level > 0.0 && c.t0 > 0.0,
                  "sweep: fpr_level and t0 must be > 0");
  detail::require(c.cv_folds >= 2, "sweep: cv_folds must be >= 2");
  for (double v : c.values) {
    detail::require(std::isfinite(v), "sweep: non-finite value");
    if (c.variable == SweepVariable::lambda) {
      detail::require(v >= 0.0, "sweep: lambda values must be >= 0");
    } else {
      detail::require(v >= 1.0 && v == std::floor(v),
                      "sweep: n and p values must be positive integers");
    }
  }
  if (c.variable != SweepVariable::n) {
    detail::require(c.n >= 1, "sweep: n must be >= 1");
  }
  if (c.variable != SweepVariable::p) {
    detail::require(c.p >= 1, "sweep: p must be >= 1");
  }
}

struct SweepRecord {
  double value = 0.0;
  int trial = 0;
  std::uint64_t seed = 0;
  int n = 0;
  int p = 0;
  double lgc_forward = 0.0;  // source -> target
  double lgc_reverse = 0.0;  // target -> source
  double lambda_forward = 0.0;
  double lambda_reverse = 0.0;
  /// NaN when no positive threshold reaches the requested level.
  double threshold = std::numeric_limits<double>::quiet_NaN();
  bool detect_forward = false;
  bool detect_reverse = false;
};

struct HullStats {
  double min = 0.0;
  double median = 0.0;
  double max = 0.0;
};

inline HullStats hull_of(std::vector<double> v) {
  HullStats h;
  if (v.empty()) {
    h.min = h.median = h.max = std::numeric_limits<double>::quiet_NaN();
    return h;
  }
  std::sort(v.begin(), v.end());
  h.min = v.front();
  h.max = v.back();
  const std::size_t m = v.size() / 2;
  h.median = v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
  return h;
}

struct SweepSummaryRow {
  double value = 0.0;
  HullStats forward;
  HullStats reverse;
  double detect_rate_forward = 0.0;
  double detect_rate_reverse = 0.0;
  double threshold = std::numeric_limits<double>::quiet_NaN();
  /// min forward > max reverse: some threshold separates every trial.
  bool separable = false;
};

struct SweepResult {
  SweepConfig config;
  std::vector<SweepRecord> records;  // value-major, then trial
  std::vector<SweepSummaryRow> summary;
};

inline std::vector<SweepSummaryRow> summarize(
    const std::vector<SweepRecord>& records) {
  std::vector<SweepSummaryRow> out;
  std::size_t i = 0;
  while (i < records.size()) {
    std::size_t j = i;
    std::vector<double> fwd, rev;
    int df = 0, dr = 0;
    while (j < records.size() && records[j].value == records[i].value) {
      fwd.push_back(records[j].lgc_forward);
      rev.push_back(records[j].lgc_reverse);
      df += records[j].detect_forward;
      dr += records[j].detect_reverse;
      ++j;
    }
    SweepSummaryRow row;
    row.value = records[i].value;
    row.forward = hull_of(fwd);
    row.reverse = hull_of(rev);
    const double cnt = static_cast<double>(j - i);
    row.detect_rate_forward = df / cnt;
    row.detect_rate_reverse = dr / cnt;
    row.threshold = records[i].threshold;
    row.separable = row.forward.min > row.reverse.max;
    out.push_back(row);
    i = j;
  }
  return out;
}

namespace detail {

/// Columns (source, target) of a simulated trajectory. The latent channels
/// are dropped here and nowhere else.
inline MatrixXd observed_pair(const MatrixXd& data, int source, int target) {
  require(source < data.cols() && target < data.cols(),
          "sweep: analysis channel out of range for the model");
  MatrixXd out(data.rows(), 2);
  out.col(0) = data.col(source);
  out.col(1) = data.col(target);
  return out;
}

struct DirectionFit {
  double lgc = 0.0;
  double lambda = 0.0;
};

inline double cv_lambda(const DesignProblem& full, const SweepConfig& c) {
  const auto grid = default_lambda_grid(full, c.cv_grid, c.cv_ratio);
  return cross_validate_lambda(full, grid, c.cv_folds).chosen_lambda;
}

inline DirectionFit direction_fit(const MatrixXd& pair, int target, int source,
                                  int p, const SweepConfig& c,
                                  std::optional<double> lambda) {
  const DesignProblem full = build_design(pair, target, p);
  const double lam = lambda ? *lambda : cv_lambda(full, c);
  const GcFits fits = gc_from_design(full, source, LambdaChoice::fixed(lam));
  return {fits.result.lgc, lam};
}

inline void fill_threshold(SweepRecord& rec, const SweepConfig& c) {
  try {
    rec.threshold = threshold_for_fpr(c.fpr_level, rec.n, rec.p, c.t0).threshold;
    rec.detect_forward = rec.lgc_forward > rec.threshold;
    rec.detect_reverse = rec.lgc_reverse > rec.threshold;
  } catch (const InfeasibleThreshold&) {
    rec.threshold = std::numeric_limits<double>::quiet_NaN();
  }
}

inline void run_trial(const VarModel& model, const SweepConfig& c, int trial,
                      std::vector<SweepRecord>& records) {
  const std::uint64_t seed = c.seed_base + static_cast<std::uint64_t>(trial);
  const int nv = static_cast<int>(c.values.size());
  const int order = model.order();
  auto slot = [&](int vi) -> SweepRecord& {
    return records[static_cast<std::size_t>(vi) * c.trials + trial];
  };

  if (c.variable == SweepVariable::lambda) {
    // One trajectory per trial; every lambda reuses the same Gram system.
    const int len = std::max(1, c.n + c.p - order);
    const MatrixXd pair = observed_pair(
        simulate(model, len, c.burn_in, seed).data, c.source, c.target);
    const int src = 0, tgt = 1;
    const DesignProblem fwd_full = build_design(pair, tgt, c.p);
    const DesignProblem rev_full = build_design(pair, src, c.p);
    auto path_lgc = [&](const DesignProblem& full, int source) {
      const DesignProblem red = restrict(full, source);
      std::vector<double> positive;
      for (double v : c.values) {
        if (v > 0.0) positive.push_back(v);
      }
      const auto ff = fit_lasso_path(full, positive);
      const auto rf = fit_lasso_path(red, positive);
      std::vector<double> out(nv);
      std::size_t k = 0;
      for (int vi = 0; vi < nv; ++vi) {
        if (c.values[vi] > 0.0) {
          out[vi] = lgc_statistic(full, source, ff[k], rf[k]).lgc;
          ++k;
        } else {
          out[vi] = lgc_statistic(full, source, fit_ols(full), fit_ols(red)).lgc;
        }
      }
      return out;
    };
    const auto fwd = path_lgc(fwd_full, src);
    const auto rev = path_lgc(rev_full, tgt);
    for (int vi = 0; vi < nv; ++vi) {
      SweepRecord& r = slot(vi);
      r.value = c.values[vi];
      r.trial = trial;
      r.seed = seed;
      r.n = fwd_full.n;
      r.p = c.p;
      r.lgc_forward = fwd[vi];
      r.lgc_reverse = rev[vi];
      r.lambda_forward = r.lambda_reverse = c.values[vi];
      fill_threshold(r, c);
    }
    return;
  }

  for (int vi = 0; vi < nv; ++vi) {
    const int n = c.variable == SweepVariable::n ? static_cast<int>(c.values[vi]) : c.n;
    const int p = c.variable == SweepVariable::p ? static_cast<int>(c.values[vi]) : c.p;
    // n + p rows of data give exactly n regression rows.
    const int len = std::max(1, n + p - order);
    const MatrixXd pair = observed_pair(
        simulate(model, len, c.burn_in, seed).data, c.source, c.target);
    std::optional<double> lam;
    if (!c.cross_validate) lam = c.lambda;
    const DirectionFit fwd = direction_fit(pair, 1, 0, p, c, lam);
    const DirectionFit rev = direction_fit(pair, 0, 1, p, c, lam);
    SweepRecord& r = slot(vi);
    r.value = c.values[vi];
    r.trial = trial;
    r.seed = seed;
    r.n = static_cast<int>(pair.rows()) - p;
    r.p = p;
    r.lgc_forward = fwd.lgc;
    r.lgc_reverse = rev.lgc;
    r.lambda_forward = fwd.lambda;
    r.lambda_reverse = rev.lambda;
    fill_threshold(r, c);
  }
}

}  // namespace detail

/// Runs every (value, trial) cell. Trials run in parallel; each is a pure
/// function of (config, seed_base + trial), so output is independent of the
/// thread count.
inline SweepResult run_sweep(const VarModel& model, const SweepConfig& config) {
  validate(config);
  detail::require(std::max(config.source, config.target) < model.dim(),
                  "sweep: analysis channel out of range for the model");
  SweepResult res;
  res.config = config;
  res.records.resize(config.values.size() * static_cast<std::size_t>(config.trials));

  int workers = config.threads > 0
                    ? config.threads
                    : static_cast<int>(std::thread::hardware_concurrency());
  workers = std::clamp(workers, 1, config.trials);

  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    for (int t = next++; t < config.trials; t = next++) {
      try {
        detail::run_trial(model, config, t, res.records);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = config.trials;
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);
  res.summary = summarize(res.records);
  return res;
}

// ---------------------------------------------------------------------------
// Ingestion

class FileNotFoundError : public InputError {
 public:
  using InputError::InputError;
};
class RaggedRowError : public InputError {
 public:
  using InputError::InputError;
};
class NonNumericCellError : public InputError {
 public:
  using InputError::InputError;
};

struct IngestOptions {
  /// Channel columns by header name; empty selects every column except a
  /// leading time column named "t".
  std::vector<std::string> columns;
  bool center = true;
  bool zscore = false;
};

struct IngestedData {
  MatrixXd data;
  std::vector<std::string> names;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  errno = 0;
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size() && errno != ERANGE && std::isfinite(out);
}

}  // namespace detail

/// Reads numeric channels from a CSV file. A first row containing any
/// non-numeric cell is taken as the header; without one, columns are named
/// ch0, ch1, ...
inline IngestedData ingest_csv(const std::string& path,
                               const IngestOptions& opt = {}) {
  std::ifstream in(path);
  if (!in) throw FileNotFoundError("ingest_csv: cannot open '" + path + "'");

  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    rows.push_back(detail::split_csv_line(line));
  }
  if (rows.empty()) throw InputError("ingest_csv: '" + path + "' is empty");

  std::vector<std::string> header;
  std::size_t first = 0;
  double tmp;
  for (const auto& cell : rows[0]) {
    if (!detail::parse_double(cell, tmp)) {
      header = rows[0];
      first = 1;
      break;
    }
  }
  const std::size_t width = rows[0].size();
  if (header.empty()) {
    for (std::size_t c = 0; c < width; ++c) header.push_back("ch" + std::to_string(c));
  }

  std::vector<std::size_t> pick;
  if (opt.columns.empty()) {
    for (std::size_t c = 0; c < width; ++c) {
      if (c == 0 && header[c] == "t") continue;
      pick.push_back(c);
    }
  } else {
    for (const auto& name : opt.columns) {
      const auto it = std::find(header.begin(), header.end(), name);
      if (it == header.end()) {
        throw InputError("ingest_csv: no column named '" + name + "'");
      }
      pick.push_back(static_cast<std::size_t>(it - header.begin()));
    }
  }
  if (pick.empty()) throw InputError("ingest_csv: no channel columns");

  const std::size_t nrows = rows.size() - first;
  if (nrows == 0) throw InputError("ingest_csv: no data rows");
  IngestedData out;
  out.data.resize(static_cast<Eigen::Index>(nrows), static_cast<Eigen::Index>(pick.size()));
  for (std::size_t r = first; r < rows.size(); ++r) {
    if (rows[r].size() != width) {
      throw RaggedRowError("ingest_csv: line " + std::to_string(r + 1) +
                           " has " + std::to_string(rows[r].size()) +
                           " cells, expected " + std::to_string(width));
    }
    for (std::size_t k = 0; k < pick.size(); ++k) {
      const std::string& cell = rows[r][pick[k]];
      double v;
      if (!detail::parse_double(cell, v)) {
        throw NonNumericCellError("ingest_csv: line " + std::to_string(r + 1) +
                                  ", column '" + header[pick[k]] +
                                  "': non-numeric value '" + cell + "'");
      }
      out.data(static_cast<Eigen::Index>(r - first), static_cast<Eigen::Index>(k)) = v;
    }
  }
  for (std::size_t k : pick) out.names.push_back(header[k]);

  if (opt.center || opt.zscore) {
    const Eigen::RowVectorXd mean = out.data.colwise().mean();
    out.data.rowwise() -= mean;
  }
  if (opt.zscore) {
    for (Eigen::Index c = 0; c < out.data.cols(); ++c) {
      const double sd = std::sqrt(out.data.col(c).squaredNorm() /
                                  std::max<Eigen::Index>(1, out.data.rows() - 1));
      if (sd > 0.0) out.data.col(c) /= sd;
    }
  }
  return out;
}

struct Psth {
  std::vector<double> rate;  // mean count per unit per bin
  std::size_t ignored = 0;   // events outside [t_start, t_end]
  double t_start = 0.0;
  double bin_width = 0.0;
};

/// Bins each unit's spikes and averages the counts over units. Bin b covers
/// [t_start + b w, t_start + (b+1) w); an event exactly at t_end joins the
/// last bin.
inline Psth bin_spikes(const std::vector<std::vector<double>>& units,
                       double bin_width, double t_start, double t_end) {
  detail::require(bin_width > 0.0 && std::isfinite(bin_width),
                  "bin_spikes: bin_width must be > 0");
  detail::require(t_end > t_start, "bin_spikes: t_end must exceed t_start");
  // Tolerate representation error so 51.2 s at 0.04 s gives 1280 bins.
  const double span = (t_end - t_start) / bin_width;
  const auto nbins = static_cast<std::size_t>(
      std::max(1.0, std::ceil(span - 1e-9 * std::max(1.0, span))));
  Psth out;
  out.rate.assign(nbins, 0.0);
  out.t_start = t_start;
  out.bin_width = bin_width;
  for (const auto& unit : units) {
    detail::require(std::is_sorted(unit.begin(), unit.end()),
                    "bin_spikes: spike times must be sorted per unit");
    for (double t : unit) {
      if (!(t >= t_start && t <= t_end)) {
        ++out.ignored;
        continue;
      }
      const double q = (t - t_start) / bin_width;
      auto b = static_cast<std::size_t>(std::floor(q + 1e-9 * std::max(1.0, q)));
      b = std::min(b, nbins - 1);
      out.rate[b] += 1.0;
    }
  }
  if (!units.empty()) {
    for (double& v : out.rate) v /= static_cast<double>(units.size());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Pair analysis

struct PairOptions {
  LambdaChoice lambda = LambdaChoice::cross_validated(5);
  double t0 = kDefaultT0;
  double fpr = kDefaultFpr;
};

struct PairRow {
  int source = 0;
  int target = 0;
  int n = 0;
  int p = 0;
  double lambda = 0.0;
  double lgc = 0.0;          // penalized fits
  double classical_f = 0.0;  // least-squares fits
  double p_value_lgc = 1.0;
  double p_value_chi2 = 1.0;
  bool detected = false;  // p_value_lgc < fpr
};

struct PairAnalysis {
  GcResult lasso_forward, lasso_reverse;
  GcResult ols_forward, ols_reverse;
  PairRow forward, reverse;
};

inline constexpr const char* kPairCsvHeader =
    "source,target,n,p,lambda,lgc,classical_f,p_value_lgc,p_value_chi2";

namespace detail {

inline PairRow pair_row(const GcResult& lasso, const GcResult& ols,
                        const PairOptions& opt) {
  PairRow r;
  r.source = lasso.source_channel;
  r.target = lasso.target_channel;
  r.n = lasso.n;
  r.p = lasso.p;
  r.lambda = lasso.lambda;
  r.lgc = lasso.lgc;
  r.classical_f = ols.classical_f;
  r.p_value_lgc = lgc_p_value(lasso.lgc, lasso.n, lasso.p, opt.t0, lasso.d);
  r.p_value_chi2 = std::isfinite(ols.classical_f)
                       ? classical_gc_test(ols).p_value
                       : std::numeric_limits<double>::quiet_NaN();
  r.detected = r.p_value_lgc < opt.fpr;
  return r;
}

}  // namespace detail

/// Both directions between two channels. Lambda is chosen on each
/// direction's full model and reused for its reduced model.
inline PairAnalysis analyze_pair(const MatrixXd& data, int target, int source,
                                 int p, const PairOptions& opt = {}) {
  detail::require(data.rows() >= p + 1, "analyze_pair: need at least p+1 rows");
  detail::require(source != target, "analyze_pair: source equals target");
  PairAnalysis out;
  auto run = [&](int tgt, int src, GcResult& lasso, GcResult& ols) {
    const DesignProblem full = build_design(data, tgt, p);
    lasso = gc_from_design(full, src, opt.lambda).result;
    ols = gc_from_design(full, src, LambdaChoice::fixed(0.0)).result;
  };
  run(target, source, out.lasso_forward, out.ols_forward);
  run(source, target, out.lasso_reverse, out.ols_reverse);
  out.forward = detail::pair_row(out.lasso_forward, out.ols_forward, opt);
  out.reverse = detail::pair_row(out.lasso_reverse, out.ols_reverse, opt);
  return out;
}

// ---------------------------------------------------------------------------
// Output

/// Shortest round-trip decimal for a double.
inline std::string fmt_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string pair_csv_row(const PairRow& r) {
  std::ostringstream os;
  os << r.source << ',' << r.target << ',' << r.n << ',' << r.p << ','
     << fmt_double(r.lambda) << ',' << fmt_double(r.lgc) << ','
     << fmt_double(r.classical_f) << ',' << fmt_double(r.p_value_lgc) << ','
     << fmt_double(r.p_value_chi2);
  return os.str();
}

inline constexpr const char* kRecordCsvHeader =
    "value,trial,seed,n,p,lgc_forward,lgc_reverse,lambda_forward,"
    "lambda_reverse,threshold,detect_forward,detect_reverse";

inline std::string records_csv(const std::vector<SweepRecord>& records) {
  std::ostringstream os;
  os << kRecordCsvHeader << '\n';
  for (const auto& r : records) {
    os << fmt_double(r.value) << ',' << r.trial << ',' << r.seed << ',' << r.n
       << ',' << r.p << ',' << fmt_double(r.lgc_forward) << ','
       << fmt_double(r.lgc_reverse) << ',' << fmt_double(r.lambda_forward)
       << ',' << fmt_double(r.lambda_reverse) << ','
       << fmt_double(r.threshold) << ',' << int(r.detect_forward) << ','
       << int(r.detect_reverse) << '\n';
  }
  return os.str();
}

inline constexpr const char* kSummaryCsvHeader =
    "value,forward_min,forward_median,forward_max,reverse_min,reverse_median,"
    "reverse_max,detect_rate_forward,detect_rate_reverse,threshold,separable";

inline std::string summary_csv(const std::vector<SweepSummaryRow>& rows) {
  std::ostringstream os;
  os << kSummaryCsvHeader << '\n';
  for (const auto& s : rows) {
    os << fmt_double(s.value) << ',' << fmt_double(s.forward.min) << ','
       << fmt_double(s.forward.median) << ',' << fmt_double(s.forward.max)
       << ',' << fmt_double(s.reverse.min) << ','
       << fmt_double(s.reverse.median) << ',' << fmt_double(s.reverse.max)
       << ',' << fmt_double(s.detect_rate_forward) << ','
       << fmt_double(s.detect_rate_reverse) << ',' << fmt_double(s.threshold)
       << ',' << int(s.separable) << '\n';
  }
  return os.str();
}

struct PlotOptions {
  std::string title;
  std::string x_label;
  bool log_x = false;
  bool log_y = true;
  int width = 640;
  int height = 420;
};

namespace detail {

inline std::string xml_escape(const std::string& s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

class Axis {
 public:
  Axis(double lo, double hi, bool log, double px_lo, double px_hi)
      : log_(log), px_lo_(px_lo), px_hi_(px_hi) {
    lo_ = log ? std::log10(lo) : lo;
    hi_ = log ? std::log10(hi) : hi;
    if (!(hi_ > lo_)) {  // degenerate range: pad around the single value
      const double pad = lo_ == 0.0 ? 1.0 : 0.5 * std::abs(lo_);
      lo_ -= pad;
      hi_ += pad;
    }
  }
  double operator()(double v) const {
    const double u = log_ ? std::log10(v) : v;
    return px_lo_ + (u - lo_) / (hi_ - lo_) * (px_hi_ - px_lo_);
  }
  std::vector<double> ticks() const {
    std::vector<double> t;
    if (log_) {
      for (double e = std::ceil(lo_); e <= std::floor(hi_); e += 1.0) {
        t.push_back(std::pow(10.0, e));
      }
    } else {
      for (int i = 0; i <= 4; ++i) t.push_back(lo_ + (hi_ - lo_) * i / 4.0);
    }
    return t;
  }

 private:
  bool log_;
  double lo_, hi_, px_lo_, px_hi_;
};

}  // namespace detail

/// One SVG per sweep: per-direction median polyline, min-max hull, and the
/// threshold as a dashed line. Every plotted number is also written as a
/// data-* attribute in round-trip precision.
inline std::string render_sweep_svg(const std::vector<SweepSummaryRow>& rows,
                                    const PlotOptions& opt = {}) {
  detail::require(!rows.empty(), "render_plots: no records");
  const double left = 70, right = opt.width - 20.0;
  const double top = 40, bottom = opt.height - 50.0;

  bool log_x = opt.log_x;
  bool log_y = opt.log_y;
  double xlo = rows.front().value, xhi = rows.back().value;
  if (log_x && !(xlo > 0.0)) log_x = false;
  double ylo = std::numeric_limits<double>::infinity();
  double yhi = -std::numeric_limits<double>::infinity();
  for (const auto& r : rows) {
    for (double v : {r.forward.min, r.forward.max, r.reverse.min,
                     r.reverse.max, r.threshold}) {
      if (!std::isfinite(v)) continue;
      ylo = std::min(ylo, v);
      yhi = std::max(yhi, v);
    }
  }
  if (!std::isfinite(ylo)) ylo = yhi = 0.0;
  if (log_y && !(ylo > 0.0)) log_y = false;
  const detail::Axis ax(xlo, xhi, log_x, left, right);
  const detail::Axis ay(ylo, yhi, log_y, bottom, top);

  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << opt.width
     << "\" height=\"" << opt.height << "\" viewBox=\"0 0 " << opt.width << ' '
     << opt.height << "\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!opt.title.empty()) {
    os << "<text x=\"" << opt.width / 2 << "\" y=\"22\" text-anchor=\"middle\" "
       << "font-family=\"sans-serif\" font-size=\"14\">"
       << detail::xml_escape(opt.title) << "</text>\n";
  }
  os << "<g stroke=\"black\" fill=\"none\">\n"
     << "<line x1=\"" << left << "\" y1=\"" << bottom << "\" x2=\"" << right
     << "\" y2=\"" << bottom << "\"/>\n"
     << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left
     << "\" y2=\"" << bottom << "\"/>\n</g>\n";
  os << "<g font-family=\"sans-serif\" font-size=\"10\">\n";
  for (double t : ax.ticks()) {
    os << "<text x=\"" << ax(t) << "\" y=\"" << bottom + 14
       << "\" text-anchor=\"middle\">" << fmt_double(t) << "</text>\n";
  }
  for (double t : ay.ticks()) {
    os << "<text x=\"" << left - 4 << "\" y=\"" << ay(t) + 3
       << "\" text-anchor=\"end\">" << fmt_double(t) << "</text>\n";
  }
  os << "<text x=\"" << (left + right) / 2 << "\" y=\"" << opt.height - 12
     << "\" text-anchor=\"middle\">" << detail::xml_escape(opt.x_label)
     << "</text>\n</g>\n";

  struct Series {
    const char* name;
    const char* color;
    HullStats SweepSummaryRow::*field;
  };
  const Series series[] = {{"forward", "#1f77b4", &SweepSummaryRow::forward},
                           {"reverse", "#d62728", &SweepSummaryRow::reverse}};
  for (const auto& s : series) {
    std::ostringstream hull, line;
    for (const auto& r : rows) hull << ax(r.value) << ',' << ay((r.*s.field).max) << ' ';
    for (auto it = rows.rbegin(); it != rows.rend(); ++it) {
      hull << ax(it->value) << ',' << ay(((*it).*s.field).min) << ' ';
    }
    for (const auto& r : rows) line << ax(r.value) << ',' << ay((r.*s.field).median) << ' ';
    os << "<g class=\"series\" data-series=\"" << s.name << "\">\n"
       << "<polygon points=\"" << hull.str() << "\" fill=\"" << s.color
       << "\" fill-opacity=\"0.25\" stroke=\"none\"/>\n"
       << "<polyline points=\"" << line.str() << "\" fill=\"none\" stroke=\""
       << s.color << "\" stroke-width=\"1.5\"/>\n";
    for (const auto& r : rows) {
      const HullStats& h = r.*s.field;
      os << "<circle cx=\"" << ax(r.value) << "\" cy=\"" << ay(h.median)
         << "\" r=\"2\" fill=\"" << s.color << "\" data-x=\""
         << fmt_double(r.value) << "\" data-min=\"" << fmt_double(h.min)
         << "\" data-median=\"" << fmt_double(h.median) << "\" data-max=\""
         << fmt_double(h.max) << "\"/>\n";
    }
    os << "</g>\n";
  }
  std::ostringstream thr;
  int finite = 0;
  for (const auto& r : rows) {
    if (!std::isfinite(r.threshold) || (log_y && r.threshold <= 0.0)) continue;
    thr << ax(r.value) << ',' << ay(r.threshold) << ' ';
    ++finite;
  }
  if (finite > 0) {
    os << "<polyline class=\"threshold\" points=\"" << thr.str()
       << "\" fill=\"none\" stroke=\"black\" stroke-dasharray=\"6,4\"/>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace lgc
