// Acceptance run: one PASS/FAIL line per criterion.
#include <chrono>
#include <cstdio>
#include <iostream>
#include <map>
#include <set>
#include <string>

#include <CLI11.hpp>

#include "cyclesync/evaluation.hpp"
#include "cyclesync/harness.hpp"
#include "cyclesync/rotation_sync.hpp"
#include "support/oracles.hpp"
#include "support/planted.hpp"
#include "support/properties.hpp"

using namespace cyclesync;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

std::vector<std::uint64_t> seeds10() { return {0, 1, 2, 3, 4, 5, 6, 7, 8, 9}; }

SweepReport location_sweep(double q, double sigma, CorruptionModel model,
                           const std::vector<std::string>& methods) {
  SweepSpec spec;
  spec.scenario = {100, 0.5, q, sigma, model, 0};
  spec.param = "q";
  spec.values = {q};
  spec.seeds = seeds10();
  for (const auto& m : methods) spec.methods.push_back(MethodSpec::parse(m));
  return run_sweep(spec);
}

const SweepAggregate& cell(const SweepReport& rep, const std::string& method) {
  for (const auto& a : rep.aggregates)
    if (a.method == method) return a;
  throw Error("missing method " + method);
}

int failed_rows(const SweepReport& rep) {
  int k = 0;
  for (const auto& r : rep.rows) k += !r.error.empty();
  return k;
}

Outcome c1() {
  const auto rep = location_sweep(0.7, 0.0, CorruptionModel::kUniform, {"welsch:t10"});
  const auto& a = cell(rep, "welsch:t10");
  return {a.exact_count >= 9, std::to_string(a.exact_count) + "/10 seeds exact, mean median " +
                                  fmt("%.3g", a.median_err_mean) + ", failed runs " +
                                  std::to_string(failed_rows(rep))};
}

Outcome c2() {
  const auto rep =
      location_sweep(0.5, 0.0, CorruptionModel::kUniform, {"welsch:t10", "l1:zero:uniform"});
  const double ours = cell(rep, "welsch:t10").median_err_mean;
  const double base = cell(rep, "l1:zero:uniform").median_err_mean;
  return {base > ours, "baseline " + fmt("%.4g", base) + " vs default " + fmt("%.4g", ours)};
}

Outcome c3() {
  const auto noisy = location_sweep(0.45, 0.2, CorruptionModel::kAdversarial, {"welsch:t10"});
  const auto clean = location_sweep(0.45, 0.0, CorruptionModel::kAdversarial, {"welsch:t10"});
  const double e_noisy = cell(noisy, "welsch:t10").median_err_mean;
  const double e_clean = cell(clean, "welsch:t10").median_err_mean;
  const bool in_band = std::abs(e_noisy - 0.17) <= 0.05;
  return {in_band && e_clean < 1e-2, "noisy " + fmt("%.4g", e_noisy) + " (target 0.17+-0.05" +
                                         (in_band ? ", in band" : ", out of band") +
                                         "), noise-free " + fmt("%.3g", e_clean)};
}

Outcome c4() {
  const auto rep = location_sweep(0.7, 0.2, CorruptionModel::kUniform,
                                  {"welsch:t10", "welsch:one", "welsch:zero"});
  const double t10 = cell(rep, "welsch:t10").median_err_mean;
  const double one = cell(rep, "welsch:one").median_err_mean;
  const double zero = cell(rep, "welsch:zero").median_err_mean;
  const bool order = t10 < one && t10 < zero;
  const bool values = std::abs(t10 - 0.24) <= 0.08 && std::abs(one - 0.37) <= 0.08 &&
                      std::abs(zero - 0.36) <= 0.08;
  return {order && values, "t/(t+10) " + fmt("%.4g", t10) + ", one " + fmt("%.4g", one) +
                               ", zero " + fmt("%.4g", zero) + " (targets 0.24/0.37/0.36+-0.08); " +
                               "ordering " + (order ? "holds" : "broken") + ", values " +
                               (values ? "in band" : "out of band")};
}

Outcome c5(int budget) {
  int accepted = 0, violations = 0, attempts = 0;
  std::map<std::string, int> reasons;
  for (std::uint64_t seed = 0; accepted < 20 && attempts < budget; ++seed) {
    ++attempts;
    const auto rep = theorem_check(kDefaultWellShapedAngle, 200, 0.6, 0.05, seed, 1, 10);
    if (rep.accepted()) {
      ++accepted;
      violations += rep.bounds.violations;
    } else {
      for (const auto& r : rep.rejections) ++reasons[r.substr(0, r.find(':'))];
    }
  }
  const auto planted = planted::separation_instance();
  const auto prep = check_instance(planted.g, planted.dirs, kDefaultWellShapedAngle, 10);
  std::string why;
  for (const auto& [r, k] : reasons) why += (why.empty() ? "" : "; ") + r + " x" + std::to_string(k);
  return {accepted >= 20 && violations == 0,
          std::to_string(accepted) + "/20 instances accepted in " + std::to_string(attempts) +
              " attempts, " + std::to_string(violations) + " violations" +
              (why.empty() ? "" : " (rejected: " + why + ")") + "; planted instance " +
              prep.outcome};
}

Outcome c6() {
  Rng rng(6);
  double worst = 0.0;
  for (int c = 0; c < 50; ++c) {
    const int n = 2 + static_cast<int>(rng.uniform() * 7);
    const ViewGraph g = oracle::random_connected_graph(n, 0.5, rng);
    const auto t = props::random_points(n, rng);
    const auto d = props::noisy_directions(g, t, 0.4, rng);
    const auto w = props::random_weights(g.num_edges(), rng);
    std::vector<double> alpha(g.num_edges());
    for (double& a : alpha) a = 1.0 + 3.0 * rng.uniform();
    const auto expect = oracle::dense_locations(g, d.gamma, w, alpha);
    const auto got = solve_locations(g, d, w, alpha);
    for (int i = 0; i < n; ++i) worst = std::max(worst, (got[i] - expect[i]).cwiseAbs().maxCoeff());
  }
  return {worst < 1e-6, "50 graphs, max coordinate deviation " + fmt("%.3g", worst)};
}

Outcome c7() {
  Rng rng(7);
  double worst = 0.0;
  for (int tested = 0; tested < 100;) {
    const Vec3 g_ij = oracle::random_unit(rng), g_jk = oracle::random_unit(rng),
               g_ki = oracle::random_unit(rng);
    const double theta = triangle_angle(-g_ki, g_jk);
    if (theta < kDefaultWellShapedAngle || theta > std::numbers::pi - kDefaultWellShapedAngle)
      continue;
    ++tested;
    worst = std::max(worst, std::abs(aab_inconsistency(g_ij, g_jk, g_ki) -
                                     oracle::brute_aab(g_ij, g_jk, g_ki, 100000)));
  }
  return {worst <= 2e-3, "100 triples, max deviation " + fmt("%.3g", worst)};
}

Outcome c8() {
  double clean_worst = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto data = sample_rotation_scenario(50, 0.5, 0.0, 0.0, seed);
    const auto est = mpls_cycle(data.graph, data.rots);
    const auto err = rotation_errors(est.rotations, data.truth.rotations);
    for (double e : err.errors_deg) clean_worst = std::max(clean_worst, e * std::numbers::pi / 180);
  }
  int wins = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto data = sample_rotation_scenario(50, 0.5, 0.3, 0.0, seed);
    const auto est = mpls_cycle(data.graph, data.rots);
    const auto base = bfs_tree_rotations(data.graph, data.rots);
    wins += rotation_errors(est.rotations, data.truth.rotations).mean_deg <
            rotation_errors(base, data.truth.rotations).mean_deg;
  }
  return {clean_worst < 1e-6 && wins == 10, "clean max error " + fmt("%.3g", clean_worst) +
                                                " rad, beats tree baseline on " +
                                                std::to_string(wins) + "/10 seeds"};
}

Outcome c9() {
  int failing = 0, suites = 0;
  std::string names;
  for (const auto& suite : props::all_suites()) {
    const auto r = suite(1000, 9000 + suites);
    ++suites;
    if (r.failures > 0) {
      ++failing;
      names += " [" + r.name + ": " + r.first_failure + "]";
    }
  }
  return {failing == 0, std::to_string(suites - failing) + "/" + std::to_string(suites) +
                            " suites pass at 1000 cases" + names};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  bool no_fail_exit = false;
  std::vector<int> only;
  int budget = 40;
  app.add_flag("--no-fail-exit", no_fail_exit, "Exit 0 even when a criterion fails");
  app.add_option("--only", only, "Run only these criteria")->check(CLI::Range(1, 9));
  app.add_option("--separation-attempts", budget, "Instance budget for criterion 5")
      ->check(CLI::PositiveNumber);
  CLI11_PARSE(app, argc, argv);

  const std::set<int> selected(only.begin(), only.end());
  int failures = 0;
  auto run = [&](int id, auto&& fn) {
    if (!selected.empty() && !selected.count(id)) return;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& ex) {
      o = {false, std::string("error: ") + ex.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failures += !o.pass;
    std::cout << "criterion " << id << ": " << (o.pass ? "PASS" : "FAIL") << "  " << o.detail
              << "  [" << fmt("%.1f", secs) << " s]" << std::endl;
  };
  run(1, c1);
  run(2, c2);
  run(3, c3);
  run(4, c4);
  run(5, [&] { return c5(budget); });
  run(6, c6);
  run(7, c7);
  run(8, c8);
  run(9, c9);
  return failures > 0 && !no_fail_exit ? 1 : 0;
}
