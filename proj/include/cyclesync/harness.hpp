#pragma once

// Batch runner: scenario sweeps, multi-seed statistics, CSV reports, and the
// separation-guarantee checker on generated instances.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cyclesync/direction_cycles.hpp"
#include "cyclesync/error.hpp"
#include "cyclesync/evaluation.hpp"
#include "cyclesync/location_solver.hpp"
#include "cyclesync/synthetic.hpp"
#include "cyclesync/taab.hpp"

namespace cyclesync {

/// A solver variant in a sweep: "loss:lambda[:init]", e.g. "welsch:t10" or
/// "l1:zero:uniform".
struct MethodSpec {
  std::string name;
  Loss loss = Loss::kWelschExp;
  LambdaSchedule lambda;
  WeightInit init = WeightInit::kTaab;

  static MethodSpec parse(const std::string& text) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, ':')) parts.push_back(part);
    CYCLESYNC_CHECK(parts.size() == 2 || parts.size() == 3,
                    "method must look like loss:lambda[:init], got '" + text + "'");
    MethodSpec m;
    m.name = text;
    m.loss = parse_loss(parts[0]);
    m.lambda = LambdaSchedule::parse(parts[1]);
    if (parts.size() == 3) {
      if (parts[2] == "taab") {
        m.init = WeightInit::kTaab;
      } else if (parts[2] == "uniform") {
        m.init = WeightInit::kUniform;
      } else {
        throw Error("unknown weight init '" + parts[2] + "'");
      }
    }
    return m;
  }

  SolverConfig apply(SolverConfig cfg) const {
    cfg.loss = loss;
    cfg.lambda = lambda;
    cfg.init = init;
    return cfg;
  }
};

struct SweepSpec {
  SyntheticScenario scenario;
  // One of q, sigma, p, n.
  std::string param = "q";
  std::vector<double> values;
  std::vector<std::uint64_t> seeds;
  std::vector<MethodSpec> methods;
  SolverConfig solver;
  std::string output;

  void validate() const {
    CYCLESYNC_CHECK(!values.empty(), "sweep needs at least one value");
    CYCLESYNC_CHECK(!seeds.empty(), "sweep needs at least one seed");
    CYCLESYNC_CHECK(!methods.empty(), "sweep needs at least one method");
    CYCLESYNC_CHECK(param == "q" || param == "sigma" || param == "p" || param == "n",
                    "unknown sweep parameter '" + param + "'");
    for (double v : values) (void)scenario_for(v, 0);
  }

  /// Scenario of one row. The data seed is the listed seed itself, so every
  /// method and every swept value sees the same graph and locations.
  SyntheticScenario scenario_for(double value, std::uint64_t seed) const {
    SyntheticScenario s = scenario;
    if (param == "q") {
      s.q = value;
    } else if (param == "sigma") {
      s.sigma = value;
    } else if (param == "p") {
      s.p = value;
    } else if (param == "n") {
      CYCLESYNC_CHECK(value >= 2 && value == std::floor(value), "n must be an integer >= 2");
      s.n = static_cast<int>(value);
    }
    s.seed = seed;
    s.validate();
    return s;
  }
};

/// Default corruption grid: 0, 0.1, ..., 0.9 (uniform) or 0, 0.05, ..., 0.45
/// (adversarial, which needs q < 0.5).
inline std::vector<double> default_q_grid(CorruptionModel model) {
  const double step = model == CorruptionModel::kAdversarial ? 0.05 : 0.1;
  std::vector<double> v;
  for (int k = 0; k < 10; ++k) v.push_back(std::round(k * step * 100.0) / 100.0);
  return v;
}

struct SweepRow {
  std::string method;
  std::string param;
  double value = 0.0;
  std::uint64_t seed = 0;
  double median_err = std::numeric_limits<double>::quiet_NaN();
  double mean_err = std::numeric_limits<double>::quiet_NaN();
  double runtime_s = 0.0;
  bool exact = false;
  // Empty on success.
  std::string error;
};

/// Across-seed statistics of one (method, value) cell. Standard deviations
/// use the n - 1 denominator (0 for a single seed). Failed rows are skipped.
struct SweepAggregate {
  std::string method;
  std::string param;
  double value = 0.0;
  int count = 0;
  int exact_count = 0;
  double median_err_mean = 0.0;
  double median_err_std = 0.0;
  double mean_err_mean = 0.0;
  double mean_err_std = 0.0;
  double runtime_mean = 0.0;
  double runtime_std = 0.0;
};

struct SweepReport {
  std::vector<SweepRow> rows;
  std::vector<SweepAggregate> aggregates;
};

namespace detail {

inline void mean_std(const std::vector<double>& v, double& m, double& s) {
  m = mean(v);
  s = 0.0;
  if (v.size() < 2) return;
  for (double x : v) s += (x - m) * (x - m);
  s = std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace detail

/// Aggregates in first-appearance order of (method, value).
inline std::vector<SweepAggregate> aggregate_rows(const std::vector<SweepRow>& rows) {
  std::vector<SweepAggregate> out;
  std::vector<std::vector<const SweepRow*>> members;
  for (const SweepRow& r : rows) {
    std::size_t k = 0;
    while (k < out.size() && !(out[k].method == r.method && out[k].value == r.value)) ++k;
    if (k == out.size()) {
      SweepAggregate a;
      a.method = r.method;
      a.param = r.param;
      a.value = r.value;
      out.push_back(a);
      members.emplace_back();
    }
    if (r.error.empty()) members[k].push_back(&r);
  }
  for (std::size_t k = 0; k < out.size(); ++k) {
    std::vector<double> med, avg, rt;
    for (const SweepRow* r : members[k]) {
      med.push_back(r->median_err);
      avg.push_back(r->mean_err);
      rt.push_back(r->runtime_s);
      out[k].exact_count += r->exact ? 1 : 0;
    }
    out[k].count = static_cast<int>(members[k].size());
    detail::mean_std(med, out[k].median_err_mean, out[k].median_err_std);
    detail::mean_std(avg, out[k].mean_err_mean, out[k].mean_err_std);
    detail::mean_std(rt, out[k].runtime_mean, out[k].runtime_std);
  }
  return out;
}

/// One solve of one generated scenario, evaluated after similarity alignment.
inline SweepRow run_row(const SyntheticScenario& scn, const MethodSpec& method,
                        const SolverConfig& base, const std::string& param, double value) {
  SweepRow row;
  row.method = method.name;
  row.param = param;
  row.value = value;
  row.seed = scn.seed;
  try {
    const LocationScenario data = sample_scenario(scn);
    const auto start = std::chrono::steady_clock::now();
    const LocationEstimate est = cycle_sync(data.graph, data.dirs, method.apply(base));
    row.runtime_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const AlignmentResult res = location_errors(est.locations, data.truth.locations);
    row.median_err = res.median_error;
    row.mean_err = res.mean_error;
    row.exact = exact_recovery(res);
  } catch (const std::exception& ex) {
    row.error = ex.what();
    row.exact = false;
  }
  return row;
}

/// Rows ordered by (value, seed, method).
inline SweepReport run_sweep(const SweepSpec& spec) {
  spec.validate();
  SweepReport report;
  for (double value : spec.values) {
    for (std::uint64_t seed : spec.seeds) {
      const SyntheticScenario scn = spec.scenario_for(value, seed);
      for (const MethodSpec& method : spec.methods) {
        report.rows.push_back(run_row(scn, method, spec.solver, spec.param, value));
      }
    }
  }
  report.aggregates = aggregate_rows(report.rows);
  return report;
}

// ---------------------------------------------------------------- CSV

inline const char* kCsvHeader = "method,param,value,seed,median_err,mean_err,runtime_s,exact";

namespace detail {

inline std::string csv_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

// Splits one record; handles quoted fields spanning lines.
inline bool csv_record(std::istream& in, std::vector<std::string>& fields) {
  fields.clear();
  std::string field;
  bool quoted = false, any = false, after_quote = false;
  char c;
  while (in.get(c)) {
    any = true;
    if (quoted) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field += '"';
        } else {
          quoted = false;
          after_quote = true;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"' && field.empty() && !after_quote) {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(field);
      field.clear();
      after_quote = false;
    } else if (c == '\n') {
      fields.push_back(field);
      return true;
    } else if (c != '\r') {
      if (after_quote) throw Error("csv: text after closing quote");
      field += c;
    }
  }
  if (quoted) throw Error("csv: unterminated quoted field");
  if (!any) return false;
  fields.push_back(field);
  return true;
}

inline double csv_double(const std::string& s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw Error("csv: bad number '" + s + "'");
  return v;
}

}  // namespace detail

/// Data rows, then per (method, value) two aggregate rows whose seed column
/// reads "mean" and "std"; the exact column of the "mean" row holds the count
/// of exact seeds and is empty on the "std" row. Failed rows carry "nan"
/// errors.
inline void emit_csv(const SweepReport& report, std::ostream& out) {
  out << kCsvHeader << '\n';
  for (const SweepRow& r : report.rows) {
    out << detail::csv_field(r.method) << ',' << detail::csv_field(r.param) << ','
        << detail::csv_number(r.value) << ',' << r.seed << ','
        << detail::csv_number(r.median_err) << ',' << detail::csv_number(r.mean_err) << ','
        << detail::csv_number(r.runtime_s) << ',' << (r.exact ? 1 : 0) << '\n';
  }
  for (const SweepAggregate& a : report.aggregates) {
    const std::string head = detail::csv_field(a.method) + ',' + detail::csv_field(a.param) +
                             ',' + detail::csv_number(a.value) + ',';
    out << head << "mean," << detail::csv_number(a.median_err_mean) << ','
        << detail::csv_number(a.mean_err_mean) << ',' << detail::csv_number(a.runtime_mean)
        << ',' << a.exact_count << '\n';
    out << head << "std," << detail::csv_number(a.median_err_std) << ','
        << detail::csv_number(a.mean_err_std) << ',' << detail::csv_number(a.runtime_std)
        << ",\n";
  }
}

inline void emit_csv(const SweepReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  emit_csv(report, out);
  out.flush();
  if (!out) throw Error("write failed: " + path);
}

/// Inverse of emit_csv up to the 6-digit rounding. Aggregate counts are
/// rebuilt from the data rows.
inline SweepReport parse_csv(std::istream& in) {
  SweepReport report;
  std::vector<std::string> f;
  if (!detail::csv_record(in, f)) throw Error("csv: empty input");
  std::string header;
  for (std::size_t k = 0; k < f.size(); ++k) header += (k ? "," : "") + f[k];
  CYCLESYNC_CHECK(header == kCsvHeader, "csv: unexpected header '" + header + "'");
  int line = 1;
  while (detail::csv_record(in, f)) {
    ++line;
    if (f.size() == 1 && f[0].empty()) continue;
    if (f.size() != 8) throw Error("csv: line " + std::to_string(line) + " has " +
                                   std::to_string(f.size()) + " fields");
    if (f[3] == "mean" || f[3] == "std") {
      SweepAggregate* a = nullptr;
      const double value = detail::csv_double(f[2]);
      for (SweepAggregate& x : report.aggregates) {
        if (x.method == f[0] && x.value == value) a = &x;
      }
      if (a == nullptr) {
        report.aggregates.push_back({});
        a = &report.aggregates.back();
        a->method = f[0];
        a->param = f[1];
        a->value = value;
      }
      if (f[3] == "mean") {
        a->median_err_mean = detail::csv_double(f[4]);
        a->mean_err_mean = detail::csv_double(f[5]);
        a->runtime_mean = detail::csv_double(f[6]);
        a->exact_count = std::stoi(f[7]);
      } else {
        a->median_err_std = detail::csv_double(f[4]);
        a->mean_err_std = detail::csv_double(f[5]);
        a->runtime_std = detail::csv_double(f[6]);
      }
      continue;
    }
    SweepRow r;
    r.method = f[0];
    r.param = f[1];
    r.value = detail::csv_double(f[2]);
    r.seed = std::stoull(f[3]);
    r.median_err = detail::csv_double(f[4]);
    r.mean_err = detail::csv_double(f[5]);
    r.runtime_s = detail::csv_double(f[6]);
    CYCLESYNC_CHECK(f[7] == "0" || f[7] == "1", "csv: exact flag must be 0 or 1");
    r.exact = f[7] == "1";
    if (std::isnan(r.median_err)) r.error = "failed";
    report.rows.push_back(std::move(r));
  }
  const std::vector<SweepAggregate> rebuilt = aggregate_rows(report.rows);
  for (SweepAggregate& a : report.aggregates) {
    for (const SweepAggregate& b : rebuilt) {
      if (a.method == b.method && a.value == b.value) a.count = b.count;
    }
  }
  return report;
}

// ------------------------------------------------- separation guarantee

struct TheoremCheckReport {
  // "passed", "violated" or "hypotheses unmet".
  std::string outcome = "hypotheses unmet";
  int attempts = 0;
  std::uint64_t seed = 0;
  TheoremInstance instance;
  double beta0 = 0.0;
  double growth = 0.0;
  TheoremBoundReport bounds;
  std::vector<std::string> rejections;

  bool accepted() const { return outcome != "hypotheses unmet"; }
};

/// Picks beta0 = min(default, 1 / (2 lambda)) and a growth rate halfway into
/// (1, r_max), capped at the default. Returns false if no growth fits.
inline bool admissible_schedule(const TheoremInstance& inst, const TaabConfig& defaults,
                                double& beta0, double& growth) {
  beta0 = std::min(defaults.beta0, inst.beta0_max);
  if (!(inst.r_max > 1.0)) return false;
  growth = std::isfinite(inst.r_max) ? std::min(defaults.growth, 0.5 * (1.0 + inst.r_max))
                                     : defaults.growth;
  return growth > 1.0;
}

/// Runs the angular initializer on an instance with labels and ground truth
/// and asserts both separation bounds for t = 0..iterations.
inline TheoremCheckReport check_instance(const ViewGraph& g, const DirectionMeasurements& dirs,
                                         double alpha_threshold, int iterations = 10) {
  TheoremCheckReport rep;
  const WellShapedIndex ws = well_shaped_filter(g, g.triangles(), dirs, alpha_threshold);
  const std::vector<double> aab = aab_table(g, ws, dirs);
  rep.instance = measure_theorem_instance(g, ws, aab, dirs);
  if (!rep.instance.hypotheses_hold) {
    rep.rejections.push_back(rep.instance.reason);
    return rep;
  }
  TaabConfig cfg;
  cfg.angle_threshold = alpha_threshold;
  cfg.iterations = iterations;
  if (!admissible_schedule(rep.instance, cfg, rep.beta0, rep.growth)) {
    rep.rejections.push_back("no admissible growth rate");
    return rep;
  }
  cfg.beta0 = rep.beta0;
  cfg.growth = rep.growth;
  const auto history = taab_history(g, ws, aab, cfg);
  rep.bounds = check_theorem_bounds(history, dirs, rep.instance, rep.beta0, rep.growth);
  rep.outcome = rep.bounds.violations == 0 ? "passed" : "violated";
  return rep;
}

/// Generates sigma = 0 uniform-corruption instances from seed, seed + 1, ...
/// until one satisfies the hypotheses (at most max_attempts), then checks it.
inline TheoremCheckReport theorem_check(double alpha_threshold, int n, double p, double q,
                                        std::uint64_t seed, int max_attempts = 20,
                                        int iterations = 10) {
  CYCLESYNC_CHECK(max_attempts >= 1, "max_attempts must be at least 1");
  TheoremCheckReport last;
  for (int a = 0; a < max_attempts; ++a) {
    const SyntheticScenario scn{n, p, q, 0.0, CorruptionModel::kUniform, seed + a};
    const LocationScenario data = sample_scenario(scn);
    TheoremCheckReport rep;
    if (!data.connected) {
      rep.rejections.push_back("disconnected graph");
    } else {
      rep = check_instance(data.graph, data.dirs, alpha_threshold, iterations);
    }
    rep.attempts = a + 1;
    rep.seed = seed + a;
    last.rejections.insert(last.rejections.end(), rep.rejections.begin(), rep.rejections.end());
    rep.rejections = last.rejections;
    if (rep.accepted()) return rep;
    last = rep;
  }
  return last;
}

}  // namespace cyclesync
