#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cyclesync/cyclesync.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace cyclesync;

namespace {

constexpr int kFormatVersion = 1;

// ------------------------------------------------------------ config

json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& ex) {
    throw Error("config " + path + ": " + ex.what());
  }
}

void reject_unknown(const json& obj, const std::vector<std::string>& known,
                    const std::string& where) {
  CYCLESYNC_CHECK(obj.is_object(), where + " must be an object");
  for (const auto& [key, _] : obj.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw Error("unknown config key '" + where + "." + key + "'");
    }
  }
}

template <typename T>
void take(const json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

void apply_taab(const json& j, TaabConfig& cfg) {
  reject_unknown(j, {"beta0", "growth", "iterations", "iters", "neutral", "angle_threshold"},
                 "taab");
  CYCLESYNC_CHECK(!(j.contains("iterations") && j.contains("iters")),
                  "taab.iters and taab.iterations are the same key");
  take(j, "beta0", cfg.beta0);
  take(j, "growth", cfg.growth);
  take(j, "iterations", cfg.iterations);
  take(j, "iters", cfg.iterations);
  take(j, "neutral", cfg.neutral);
  take(j, "angle_threshold", cfg.angle_threshold);
}

void apply_solver(const json& j, SolverConfig& cfg) {
  reject_unknown(j, {"loss", "a", "beta", "delta", "t_max", "lambda", "init", "wls",
                     "outer_tolerance", "taab"},
                 "solver");
  if (j.contains("loss")) cfg.loss = parse_loss(j.at("loss").get<std::string>());
  take(j, "a", cfg.a);
  take(j, "beta", cfg.beta);
  take(j, "delta", cfg.delta);
  take(j, "t_max", cfg.t_max);
  if (j.contains("lambda")) {
    const json& l = j.at("lambda");
    if (l.is_array()) {
      cfg.lambda = LambdaSchedule(l.get<std::vector<double>>());
    } else {
      cfg.lambda = LambdaSchedule::parse(l.get<std::string>());
    }
  }
  if (j.contains("init")) {
    const std::string init = j.at("init").get<std::string>();
    if (init == "taab") {
      cfg.init = WeightInit::kTaab;
    } else if (init == "uniform") {
      cfg.init = WeightInit::kUniform;
    } else {
      throw Error("unknown init '" + init + "'");
    }
  }
  if (j.contains("wls")) {
    const json& w = j.at("wls");
    reject_unknown(w, {"method", "max_iterations", "solve_tolerance", "alternation_tolerance"},
                   "solver.wls");
    if (w.contains("method")) {
      const std::string m = w.at("method").get<std::string>();
      if (m == "newton") {
        cfg.wls.method = WlsMethod::kNewton;
      } else if (m == "alternation") {
        cfg.wls.method = WlsMethod::kAlternation;
      } else {
        throw Error("unknown wls method '" + m + "'");
      }
    }
    take(w, "max_iterations", cfg.wls.max_iterations);
    take(w, "solve_tolerance", cfg.wls.solve_tolerance);
    take(w, "alternation_tolerance", cfg.wls.alternation_tolerance);
  }
  take(j, "outer_tolerance", cfg.outer_tolerance);
  if (j.contains("taab")) apply_taab(j.at("taab"), cfg.taab);
}

void apply_rotation(const json& j, RotationSyncConfig& cfg) {
  reject_unknown(j, {"beta0", "growth", "cemp_iterations", "sweeps", "a", "delta", "neutral",
                     "freeze_scores"},
                 "rotation");
  take(j, "beta0", cfg.beta0);
  take(j, "growth", cfg.growth);
  take(j, "cemp_iterations", cfg.cemp_iterations);
  take(j, "sweeps", cfg.sweeps);
  take(j, "a", cfg.a);
  take(j, "delta", cfg.delta);
  take(j, "neutral", cfg.neutral);
  take(j, "freeze_scores", cfg.freeze_scores);
}

void apply_scenario(const json& j, SyntheticScenario& s) {
  reject_unknown(j, {"n", "p", "q", "sigma", "model", "seed"}, "sweep.scenario");
  take(j, "n", s.n);
  take(j, "p", s.p);
  take(j, "q", s.q);
  take(j, "sigma", s.sigma);
  if (j.contains("model")) s.model = parse_corruption_model(j.at("model").get<std::string>());
  take(j, "seed", s.seed);
}

void apply_sweep(const json& j, SweepSpec& spec) {
  reject_unknown(j, {"scenario", "param", "values", "seeds", "methods", "output"}, "sweep");
  if (j.contains("scenario")) apply_scenario(j.at("scenario"), spec.scenario);
  take(j, "param", spec.param);
  take(j, "values", spec.values);
  take(j, "seeds", spec.seeds);
  if (j.contains("methods")) {
    spec.methods.clear();
    for (const auto& m : j.at("methods")) spec.methods.push_back(MethodSpec::parse(m.get<std::string>()));
  }
  take(j, "output", spec.output);
}

struct Config {
  SolverConfig solver;
  RotationSyncConfig rotation;
  SweepSpec sweep;
};

Config read_config(const std::string& path) {
  Config cfg;
  if (path.empty()) return cfg;
  const json j = load_config(path);
  reject_unknown(j, {"solver", "rotation", "sweep"}, "config");
  try {
    if (j.contains("solver")) apply_solver(j.at("solver"), cfg.solver);
    if (j.contains("rotation")) apply_rotation(j.at("rotation"), cfg.rotation);
    if (j.contains("sweep")) apply_sweep(j.at("sweep"), cfg.sweep);
  } catch (const json::exception& ex) {
    throw Error("config " + path + ": " + ex.what());
  }
  return cfg;
}

// ------------------------------------------------------------ helpers

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

json mat_json(const Mat3& r) {
  json rows = json::array();
  for (int a = 0; a < 3; ++a) rows.push_back(json::array({r(a, 0), r(a, 1), r(a, 2)}));
  return rows;
}

Mat3 mat_from_json(const json& j) {
  Mat3 r;
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b) r(a, b) = j.at(a).at(b).get<double>();
  }
  return r;
}

void write_json(const json& doc, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << doc.dump(2) << '\n';
    return;
  }
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << doc.dump(2) << '\n';
  if (!out) throw Error("write failed: " + path);
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  // "0-9" or "1,4,7".
  std::vector<std::uint64_t> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    const auto dash = tok.find('-');
    if (dash != std::string::npos && dash > 0) {
      const auto lo = std::stoull(tok.substr(0, dash));
      const auto hi = std::stoull(tok.substr(dash + 1));
      CYCLESYNC_CHECK(lo <= hi, "bad seed range '" + tok + "'");
      for (auto s = lo; s <= hi; ++s) out.push_back(s);
    } else {
      out.push_back(std::stoull(tok));
    }
  }
  return out;
}

std::vector<double> parse_value_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(std::stod(tok));
  return out;
}

// ------------------------------------------------------------ commands

struct GenerateArgs {
  SyntheticScenario scn;
  std::string model = "uniform";
  std::string out_dir = ".";
  bool rotations = false;
  double sigma_rot = 0.0;
};

int cmd_generate(const GenerateArgs& a) {
  SyntheticScenario scn = a.scn;
  scn.model = parse_corruption_model(a.model);
  fs::create_directories(a.out_dir);
  const fs::path dir(a.out_dir);
  json manifest = {{"version", kFormatVersion},
                   {"n", scn.n},
                   {"p", scn.p},
                   {"q", scn.q},
                   {"seed", scn.seed}};
  if (a.rotations) {
    const RotationScenario rs = sample_rotation_scenario(scn.n, scn.p, scn.q, a.sigma_rot, scn.seed);
    auto g = detail::open_output((dir / "graph.txt").string());
    write_graph(g, rs.graph);
    auto r = detail::open_output((dir / "rotations.txt").string());
    write_relative_rotations(r, rs.graph, rs.rots.rel);
    auto gt = detail::open_output((dir / "rotations_gt.txt").string());
    write_absolute_rotations(gt, rs.truth.rotations);
    auto lab = detail::open_output((dir / "labels.txt").string());
    for (int e = 0; e < rs.graph.num_edges(); ++e) {
      lab << rs.graph.edge(e).i << ' ' << rs.graph.edge(e).j << ' '
          << static_cast<int>(rs.truth.corrupt[e]) << '\n';
    }
    manifest["kind"] = "rotation";
    manifest["sigma_rot"] = a.sigma_rot;
    manifest["edges"] = rs.graph.num_edges();
    manifest["connected"] = rs.connected;
    manifest["files"] = {{"graph", "graph.txt"},
                         {"rotations", "rotations.txt"},
                         {"ground_truth", "rotations_gt.txt"},
                         {"labels", "labels.txt"}};
  } else {
    const LocationScenario ls = sample_scenario(scn);
    auto g = detail::open_output((dir / "graph.txt").string());
    write_graph(g, ls.graph);
    write_directions((dir / "directions.txt").string(), ls.graph, ls.dirs.gamma);
    write_locations((dir / "locations_gt.txt").string(), ls.truth.locations);
    auto lab = detail::open_output((dir / "labels.txt").string());
    for (int e = 0; e < ls.graph.num_edges(); ++e) {
      lab << ls.graph.edge(e).i << ' ' << ls.graph.edge(e).j << ' '
          << static_cast<int>(ls.truth.corrupt[e]) << '\n';
    }
    manifest["kind"] = "location";
    manifest["sigma"] = scn.sigma;
    manifest["model"] = to_string(scn.model);
    manifest["edges"] = ls.graph.num_edges();
    manifest["connected"] = ls.connected;
    manifest["files"] = {{"graph", "graph.txt"},
                         {"directions", "directions.txt"},
                         {"ground_truth", "locations_gt.txt"},
                         {"labels", "labels.txt"}};
  }
  write_json(manifest, (dir / "manifest.json").string());
  std::cout << "wrote " << manifest["kind"].get<std::string>() << " scenario to " << a.out_dir
            << '\n';
  return 0;
}

struct SolveLocationArgs {
  std::string graph, dirs, out = "-", config, loss, lambda, init, locations_out;
  std::optional<int> t_max;
};

int cmd_solve_location(const SolveLocationArgs& a) {
  Config cfg = read_config(a.config);
  SolverConfig& s = cfg.solver;
  if (!a.loss.empty()) s.loss = parse_loss(a.loss);
  if (!a.lambda.empty()) s.lambda = LambdaSchedule::parse(a.lambda);
  if (!a.init.empty()) s.init = MethodSpec::parse("l2:zero:" + a.init).init;
  if (a.t_max) s.t_max = *a.t_max;
  const ViewGraph g = read_graph(a.graph);
  const DirectionMeasurements dirs = read_directions(a.dirs, g);
  const LocationEstimate est = cycle_sync(g, dirs, s);

  json doc = {{"version", kFormatVersion}, {"kind", "location_estimate"}};
  doc["config"] = {{"loss", to_string(s.loss)}, {"a", s.a},          {"beta", s.beta},
                   {"delta", s.delta},          {"t_max", s.t_max},  {"lambda", s.lambda.name()},
                   {"init", s.init == WeightInit::kTaab ? "taab" : "uniform"}};
  json locs = json::array();
  for (const Vec3& t : est.locations) locs.push_back(vec_json(t));
  doc["locations"] = locs;
  json edges = json::array();
  for (int e = 0; e < g.num_edges(); ++e) {
    edges.push_back({{"i", g.edge(e).i},
                     {"j", g.edge(e).j},
                     {"w", est.weight[e]},
                     {"r", est.residual[e]},
                     {"s", est.score[e]},
                     {"h", est.blended[e]},
                     {"alpha", est.alpha[e]}});
  }
  doc["edges"] = edges;
  json log = json::array();
  for (const IterationLog& l : est.log) {
    log.push_back({{"t", l.t},
                   {"lambda", l.lambda},
                   {"objective", l.objective},
                   {"max_change", std::isfinite(l.max_change) ? json(l.max_change) : json(nullptr)},
                   {"inner_iterations", l.inner_iterations}});
  }
  doc["log"] = log;
  write_json(doc, a.out);
  if (!a.locations_out.empty()) write_locations(a.locations_out, est.locations);
  return 0;
}

struct SolveRotationArgs {
  std::string graph, rotations, out = "-", config;
  std::optional<int> sweeps;
  bool freeze = false;
};

int cmd_solve_rotation(const SolveRotationArgs& a) {
  Config cfg = read_config(a.config);
  if (a.sweeps) cfg.rotation.sweeps = *a.sweeps;
  if (a.freeze) cfg.rotation.freeze_scores = true;
  const ViewGraph g = read_graph(a.graph);
  RotationMeasurements rots;
  rots.rel = read_relative_rotations(a.rotations, g);
  const RotationEstimate est = mpls_cycle(g, rots, cfg.rotation);
  json doc = {{"version", kFormatVersion}, {"kind", "rotation_estimate"}};
  json rs = json::array();
  for (const Mat3& r : est.rotations) rs.push_back(mat_json(r));
  doc["rotations"] = rs;
  json edges = json::array();
  for (int e = 0; e < g.num_edges(); ++e) {
    edges.push_back({{"i", g.edge(e).i}, {"j", g.edge(e).j}, {"score", est.scores[e]},
                     {"w", est.weights[e]}});
  }
  doc["edges"] = edges;
  write_json(doc, a.out);
  return 0;
}

struct EvaluateArgs {
  std::string estimate, gt, out = "-";
};

int cmd_evaluate(const EvaluateArgs& a) {
  std::ifstream in(a.estimate);
  if (!in) throw Error("cannot open " + a.estimate);
  const json est = json::parse(in);
  CYCLESYNC_CHECK(est.value("version", 0) == kFormatVersion, "unsupported estimate version");
  const std::string kind = est.at("kind").get<std::string>();
  json doc = {{"version", kFormatVersion}};
  if (kind == "location_estimate") {
    Locations t;
    for (const auto& v : est.at("locations")) t.emplace_back(v.at(0), v.at(1), v.at(2));
    const Locations gt = read_locations(a.gt, static_cast<int>(t.size()));
    const AlignmentResult res = location_errors(t, gt);
    doc["kind"] = "location_errors";
    doc["scale"] = res.scale;
    doc["translation"] = vec_json(res.translation);
    doc["median_error"] = res.median_error;
    doc["mean_error"] = res.mean_error;
    doc["exact_recovery"] = exact_recovery(res);
    doc["errors"] = res.errors;
  } else if (kind == "rotation_estimate") {
    std::vector<Mat3> r;
    for (const auto& m : est.at("rotations")) r.push_back(project_to_rotation(mat_from_json(m)));
    auto gin = detail::open_input(a.gt);
    const std::vector<Mat3> gt = read_absolute_rotations(gin, static_cast<int>(r.size()));
    const RotationErrors res = rotation_errors(r, gt);
    doc["kind"] = "rotation_errors";
    doc["alignment"] = mat_json(res.alignment);
    doc["median_error_deg"] = res.median_deg;
    doc["mean_error_deg"] = res.mean_deg;
    doc["errors_deg"] = res.errors_deg;
  } else {
    throw Error("unknown estimate kind '" + kind + "'");
  }
  write_json(doc, a.out);
  return 0;
}

struct SweepArgs {
  std::string config, param, values, seeds, methods, out, model;
  std::optional<int> n;
  std::optional<double> p, q, sigma;
};

int cmd_sweep(const SweepArgs& a) {
  Config cfg = read_config(a.config);
  SweepSpec spec = cfg.sweep;
  spec.solver = cfg.solver;
  if (a.n) spec.scenario.n = *a.n;
  if (a.p) spec.scenario.p = *a.p;
  if (a.q) spec.scenario.q = *a.q;
  if (a.sigma) spec.scenario.sigma = *a.sigma;
  if (!a.model.empty()) spec.scenario.model = parse_corruption_model(a.model);
  if (!a.param.empty()) spec.param = a.param;
  if (!a.values.empty()) spec.values = parse_value_list(a.values);
  if (!a.seeds.empty()) spec.seeds = parse_seed_list(a.seeds);
  if (spec.values.empty() && spec.param == "q") spec.values = default_q_grid(spec.scenario.model);
  if (spec.seeds.empty()) spec.seeds = parse_seed_list("0-9");
  if (!a.methods.empty()) {
    spec.methods.clear();
    std::stringstream ss(a.methods);
    std::string tok;
    while (std::getline(ss, tok, ',')) spec.methods.push_back(MethodSpec::parse(tok));
  }
  if (spec.methods.empty()) spec.methods.push_back(MethodSpec::parse("welsch:t10"));
  if (!a.out.empty()) spec.output = a.out;
  CYCLESYNC_CHECK(!spec.output.empty(), "sweep needs an output path (--out)");
  const SweepReport report = run_sweep(spec);
  emit_csv(report, spec.output);
  int failed = 0;
  for (const SweepRow& r : report.rows) failed += r.error.empty() ? 0 : 1;
  for (const SweepAggregate& ag : report.aggregates) {
    std::cout << ag.method << ' ' << ag.param << '=' << ag.value << ": median err "
              << ag.median_err_mean << " +- " << ag.median_err_std << ", exact "
              << ag.exact_count << '/' << ag.count << '\n';
  }
  if (failed > 0) std::cout << failed << " row(s) failed\n";
  std::cout << "wrote " << spec.output << '\n';
  return 0;
}

struct TheoremArgs {
  double alpha = kDefaultWellShapedAngle;
  int n = 200;
  double p = 0.6;
  double q = 0.05;
  std::uint64_t seed = 0;
  int attempts = 20;
  int iterations = 10;
  std::string out;
};

int cmd_theorem(const TheoremArgs& a) {
  const TheoremCheckReport rep =
      theorem_check(a.alpha, a.n, a.p, a.q, a.seed, a.attempts, a.iterations);
  json doc = {{"version", kFormatVersion},
              {"kind", "theorem_check"},
              {"outcome", rep.outcome},
              {"attempts", rep.attempts},
              {"seed", rep.seed}};
  const auto finite = [](double x) { return std::isfinite(x) ? json(x) : json(nullptr); };
  doc["measured"] = {{"alpha", rep.instance.alpha},
                     {"lambda", rep.instance.lambda},
                     {"mu", finite(rep.instance.mu)},
                     {"c_alpha", rep.instance.c_alpha}};
  if (rep.accepted()) {
    doc["schedule"] = {{"beta0", rep.beta0}, {"growth", rep.growth}};
    doc["margins"] = {{"good", finite(rep.bounds.good_margin)},
                      {"bad", finite(rep.bounds.bad_margin)},
                      {"violations", rep.bounds.violations}};
  }
  doc["rejections"] = rep.rejections;
  write_json(doc, a.out);
  return rep.outcome == "violated" ? 2 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Robust camera location and rotation synchronization"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "Sample a synthetic scenario");
  g->add_option("--n", gen.scn.n, "Number of cameras")->capture_default_str();
  g->add_option("--p", gen.scn.p, "Edge probability")->capture_default_str();
  g->add_option("--q", gen.scn.q, "Corruption probability")->capture_default_str();
  g->add_option("--sigma", gen.scn.sigma, "Noise level")->capture_default_str();
  g->add_option("--model", gen.model, "uniform | adversarial")->capture_default_str();
  g->add_option("--seed", gen.scn.seed, "Seed")->capture_default_str();
  g->add_option("--out", gen.out_dir, "Output directory")->capture_default_str();
  g->add_flag("--rotations", gen.rotations, "Emit a rotation scenario instead");
  g->add_option("--sigma-rot", gen.sigma_rot, "Rotation noise (radians)")->capture_default_str();

  SolveLocationArgs sl;
  auto* l = app.add_subcommand("solve-location", "Run the location solver");
  l->add_option("--graph", sl.graph, "Graph file")->required();
  l->add_option("--dirs", sl.dirs, "Directions file")->required();
  l->add_option("--config", sl.config, "JSON config");
  l->add_option("--loss", sl.loss, "welsch | l1 | l2");
  l->add_option("--lambda", sl.lambda, "t10 | zero | one | decay10 | t5 | v1,v2,...");
  l->add_option("--init", sl.init, "taab | uniform");
  l->add_option("--t-max", sl.t_max, "Outer iterations");
  l->add_option("--out", sl.out, "Output JSON ('-' for stdout)")->capture_default_str();
  l->add_option("--locations-out", sl.locations_out, "Also write locations as text");

  SolveRotationArgs sr;
  auto* r = app.add_subcommand("solve-rotation", "Run the rotation synchronizer");
  r->add_option("--graph", sr.graph, "Graph file")->required();
  r->add_option("--rotations", sr.rotations, "Relative rotations file")->required();
  r->add_option("--config", sr.config, "JSON config");
  r->add_option("--sweeps", sr.sweeps, "Tangent-space sweeps");
  r->add_flag("--freeze-scores", sr.freeze, "Keep scores fixed during sweeps");
  r->add_option("--out", sr.out, "Output JSON ('-' for stdout)")->capture_default_str();

  EvaluateArgs ev;
  auto* e = app.add_subcommand("evaluate", "Align an estimate to ground truth");
  e->add_option("--estimate", ev.estimate, "Estimate JSON")->required();
  e->add_option("--gt", ev.gt, "Ground-truth locations or rotations file")->required();
  e->add_option("--out", ev.out, "Output JSON ('-' for stdout)")->capture_default_str();

  SweepArgs sw;
  auto* s = app.add_subcommand("sweep", "Multi-seed scenario sweep to CSV");
  s->add_option("--config", sw.config, "JSON config");
  s->add_option("--param", sw.param, "Swept parameter: q | sigma | p | n");
  s->add_option("--values", sw.values, "Comma-separated values");
  s->add_option("--seeds", sw.seeds, "Seeds: '0-9' or '1,2,3'");
  s->add_option("--methods", sw.methods, "Comma-separated loss:lambda[:init]");
  s->add_option("--n", sw.n, "Cameras");
  s->add_option("--p", sw.p, "Edge probability");
  s->add_option("--q", sw.q, "Corruption probability");
  s->add_option("--sigma", sw.sigma, "Noise level");
  s->add_option("--model", sw.model, "uniform | adversarial");
  s->add_option("--out", sw.out, "CSV path");

  TheoremArgs th;
  auto* t = app.add_subcommand("theorem-check", "Check the initializer's separation bounds");
  t->add_option("--alpha", th.alpha, "Well-shaped angle threshold (radians)")->capture_default_str();
  t->add_option("--n", th.n, "Cameras")->capture_default_str();
  t->add_option("--p", th.p, "Edge probability")->capture_default_str();
  t->add_option("--q", th.q, "Corruption probability")->capture_default_str();
  t->add_option("--seed", th.seed, "First seed")->capture_default_str();
  t->add_option("--attempts", th.attempts, "Seeds to try")->capture_default_str();
  t->add_option("--iterations", th.iterations, "Reweighting iterations")->capture_default_str();
  t->add_option("--out", th.out, "Output JSON (default stdout)");

  CLI11_PARSE(app, argc, argv);
  try {
    if (g->parsed()) return cmd_generate(gen);
    if (l->parsed()) return cmd_solve_location(sl);
    if (r->parsed()) return cmd_solve_rotation(sr);
    if (e->parsed()) return cmd_evaluate(ev);
    if (s->parsed()) return cmd_sweep(sw);
    if (t->parsed()) return cmd_theorem(th);
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return 1;
  }
  return 0;
}
