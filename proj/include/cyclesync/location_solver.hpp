#pragma once

// Cycle-Sync location solver: iteratively reweighted least squares over
// camera locations and edge lengths, with weights driven by a blend of edge
// residuals and residual-weighted averages of 3-cycle inconsistencies.
//
//   min  sum_ij w_ij |t_i - t_j - alpha_ij gamma_ij|^2
//   s.t. alpha_ij >= 1,  sum_i t_i = 0
//
// The same driver runs the plain IRLS baselines (l1 / l2 loss with the
// blending weight pinned at 0).

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "cyclesync/direction_cycles.hpp"
#include "cyclesync/error.hpp"
#include "cyclesync/graph.hpp"
#include "cyclesync/taab.hpp"

namespace cyclesync {

enum class Loss { kWelschExp, kL1, kL2 };

inline std::string to_string(Loss loss) {
  switch (loss) {
    case Loss::kWelschExp: return "welsch";
    case Loss::kL1: return "l1";
    case Loss::kL2: return "l2";
  }
  return "?";
}

inline Loss parse_loss(const std::string& name) {
  if (name == "welsch" || name == "welsch_exp") return Loss::kWelschExp;
  if (name == "l1") return Loss::kL1;
  if (name == "l2") return Loss::kL2;
  throw Error("unknown loss '" + name + "'");
}

/// Blending weight lambda_t for outer iterations t = 1, 2, ...
class LambdaSchedule {
 public:
  enum class Kind { kT10, kZero, kOne, kDecay10, kT5, kCustom };

  LambdaSchedule() = default;
  explicit LambdaSchedule(Kind kind) : kind_(kind) {}
  explicit LambdaSchedule(std::vector<double> values)
      : kind_(Kind::kCustom), values_(std::move(values)) {}

  static LambdaSchedule parse(const std::string& name) {
    if (name == "t10") return LambdaSchedule(Kind::kT10);
    if (name == "zero" || name == "0") return LambdaSchedule(Kind::kZero);
    if (name == "one" || name == "1") return LambdaSchedule(Kind::kOne);
    if (name == "decay10") return LambdaSchedule(Kind::kDecay10);
    if (name == "t5") return LambdaSchedule(Kind::kT5);
    // Custom: comma-separated values for t = 1, 2, ...
    std::vector<double> values;
    std::size_t pos = 0;
    while (pos <= name.size()) {
      const std::size_t next = std::min(name.find(',', pos), name.size());
      const std::string tok = name.substr(pos, next - pos);
      try {
        std::size_t used = 0;
        values.push_back(std::stod(tok, &used));
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw Error("unknown lambda schedule '" + name + "'");
      }
      pos = next + 1;
    }
    return LambdaSchedule(std::move(values));
  }

  std::string name() const {
    switch (kind_) {
      case Kind::kT10: return "t10";
      case Kind::kZero: return "zero";
      case Kind::kOne: return "one";
      case Kind::kDecay10: return "decay10";
      case Kind::kT5: return "t5";
      case Kind::kCustom: {
        std::string s;
        for (std::size_t i = 0; i < values_.size(); ++i) {
          if (i) s += ',';
          s += std::to_string(values_[i]);
        }
        return s;
      }
    }
    return "?";
  }

  Kind kind() const { return kind_; }

  double operator()(int t) const {
    const double td = t;
    switch (kind_) {
      case Kind::kT10: return td / (td + 10.0);
      case Kind::kZero: return 0.0;
      case Kind::kOne: return 1.0;
      case Kind::kDecay10: return 10.0 / (10.0 + td);
      case Kind::kT5: return td / (td + 5.0);
      case Kind::kCustom:
        CYCLESYNC_CHECK(t >= 1 && static_cast<std::size_t>(t) <= values_.size(),
                        "custom lambda schedule too short");
        return values_[t - 1];
    }
    return 0.0;
  }

  void validate(int t_max) const {
    if (kind_ != Kind::kCustom) return;
    CYCLESYNC_CHECK(values_.size() >= static_cast<std::size_t>(t_max),
                    "custom lambda schedule shorter than t_max");
    for (double v : values_) CYCLESYNC_CHECK(v >= 0.0 && v <= 1.0, "lambda_t must lie in [0, 1]");
  }

 private:
  Kind kind_ = Kind::kT10;
  std::vector<double> values_;
};

enum class WeightInit { kTaab, kUniform };

enum class WlsMethod { kNewton, kAlternation };

/// Controls for the inner weighted least squares solve.
struct WlsOptions {
  WlsMethod method = WlsMethod::kNewton;
  // Newton steps, or block alternations.
  int max_iterations = 50;
  // Normwise backward error above which a linear solve is reported as failed.
  double solve_tolerance = 1e-10;
  // Alternation stops once the max location change falls below this fraction
  // of the largest location norm.
  double alternation_tolerance = 1e-12;
};

struct SolverConfig {
  Loss loss = Loss::kWelschExp;
  double a = 4.0;
  double beta = 20.0;
  double delta = 1e-8;
  int t_max = 20;
  LambdaSchedule lambda;
  WeightInit init = WeightInit::kTaab;
  TaabConfig taab;
  WlsOptions wls;
  // Outer loop stops early when the max location change drops below this.
  double outer_tolerance = 0.0;

  void validate() const {
    CYCLESYNC_CHECK(a > 0.0, "loss parameter a must be positive");
    CYCLESYNC_CHECK(beta > 0.0, "beta must be positive");
    CYCLESYNC_CHECK(delta > 0.0, "delta must be positive");
    CYCLESYNC_CHECK(t_max >= 1, "t_max must be at least 1");
    CYCLESYNC_CHECK(wls.max_iterations >= 1, "inner WLS iteration cap must be at least 1");
    CYCLESYNC_CHECK(wls.solve_tolerance > 0.0, "solve tolerance must be positive");
    lambda.validate(t_max);
    taab.validate();
  }
};

inline double robust_loss(double x, const SolverConfig& cfg) {
  switch (cfg.loss) {
    case Loss::kWelschExp: return 1.0 - std::exp(-cfg.a * x);
    case Loss::kL1: return x;
    case Loss::kL2: return x * x;
  }
  return 0.0;
}

/// IRLS weight for blended score h. For the exponential loss this is
/// rho'(h) / (a (h + delta)) = exp(-a h) / (h + delta).
inline double reweight(double h, const SolverConfig& cfg) {
  switch (cfg.loss) {
    case Loss::kWelschExp: return std::exp(-cfg.a * h) / (h + cfg.delta);
    case Loss::kL1: return 1.0 / (h + cfg.delta);
    case Loss::kL2: return 1.0;
  }
  return 1.0;
}

using Locations = std::vector<Vec3>;

struct WlsSolution {
  Locations locations;
  std::vector<double> alpha;
  // Newton steps or block alternations performed.
  int iterations = 0;
};

namespace detail {

inline void center(Locations& t) {
  if (t.empty()) return;
  Vec3 mean = Vec3::Zero();
  for (const Vec3& p : t) mean += p;
  mean /= static_cast<double>(t.size());
  for (Vec3& p : t) p -= mean;
}

// Factorization of the weighted graph Laplacian with the rank-one gauge term
// (c / n) 11^T added; for a right-hand side orthogonal to 1 its solution is
// the mean-zero solution of L t = b.
class GaugedLaplacian {
 public:
  GaugedLaplacian(const ViewGraph& g, const std::vector<double>& w, double solve_tolerance)
      : tol_(solve_tolerance) {
    const int n = g.num_nodes();
    double w_max = 0.0;
    for (double x : w) {
      CYCLESYNC_CHECK(x >= 0.0 && std::isfinite(x), "weights must be finite and nonnegative");
      w_max = std::max(w_max, x);
    }
    CYCLESYNC_CHECK(w_max > 0.0, "all edge weights are zero");
    // The minimizer is invariant to a global weight scale.
    scale_ = 1.0 / w_max;
    lap_.setZero(n, n);
    for (int e = 0; e < g.num_edges(); ++e) {
      const auto [i, j] = g.edge(e);
      const double we = w[e] * scale_;
      lap_(i, i) += we;
      lap_(j, j) += we;
      lap_(i, j) -= we;
      lap_(j, i) -= we;
    }
    const double c = lap_.diagonal().mean() / n;
    gauged_ = (lap_.array() + c).matrix();
    llt_.compute(gauged_);
    CYCLESYNC_CHECK(llt_.info() == Eigen::Success, "linear solve failed: gauged Laplacian not positive definite");
  }

  double weight_scale() const { return scale_; }

  // rhs is n x 3 with rows summing to zero.
  Eigen::MatrixX3d solve(const Eigen::MatrixX3d& rhs) const {
    Eigen::MatrixX3d x = llt_.solve(rhs);
    const double residual = (gauged_ * x - rhs).norm();
    const double scale = gauged_.norm() * x.norm() + rhs.norm();
    if (scale > 0.0 && residual > tol_ * scale) {
      throw Error("linear solve failed, residual norm " + std::to_string(residual));
    }
    return x;
  }

 private:
  double tol_;
  double scale_ = 1.0;
  Eigen::MatrixXd lap_;
  Eigen::MatrixXd gauged_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
};

}  // namespace detail

/// Exact location update for frozen alpha.
inline Locations solve_locations(const ViewGraph& g, const DirectionMeasurements& dirs,
                                 const std::vector<double>& w, const std::vector<double>& alpha,
                                 double solve_tolerance = 1e-10) {
  CYCLESYNC_CHECK(g.connected(), "gauge not fixable: view graph is disconnected");
  detail::GaugedLaplacian lap(g, w, solve_tolerance);
  Eigen::MatrixX3d rhs = Eigen::MatrixX3d::Zero(g.num_nodes(), 3);
  for (int e = 0; e < g.num_edges(); ++e) {
    const auto [i, j] = g.edge(e);
    const Vec3 f = (w[e] * lap.weight_scale() * alpha[e]) * dirs.gamma[e];
    rhs.row(i) += f.transpose();
    rhs.row(j) -= f.transpose();
  }
  const Eigen::MatrixX3d x = lap.solve(rhs);
  Locations t(g.num_nodes());
  for (int i = 0; i < g.num_nodes(); ++i) t[i] = x.row(i).transpose();
  detail::center(t);
  return t;
}

/// Weighted least squares over locations and lengths by block alternation:
/// exact location solve for fixed alpha, then
/// alpha_ij = max(1, <t_i - t_j, gamma_ij>) for fixed locations.
inline WlsSolution solve_wls_alternating(const ViewGraph& g, const DirectionMeasurements& dirs,
                                         const std::vector<double>& w,
                                         const std::optional<WlsSolution>& warm_start,
                                         const WlsOptions& opts) {
  detail::GaugedLaplacian lap(g, w, opts.solve_tolerance);
  WlsSolution sol;
  if (warm_start) {
    sol = *warm_start;
  } else {
    sol.alpha.assign(g.num_edges(), 1.0);
    sol.locations.assign(g.num_nodes(), Vec3::Zero());
  }
  Eigen::MatrixX3d rhs(g.num_nodes(), 3);
  for (int it = 0; it < opts.max_iterations; ++it) {
    rhs.setZero();
    for (int e = 0; e < g.num_edges(); ++e) {
      const auto [i, j] = g.edge(e);
      const Vec3 f = (w[e] * lap.weight_scale() * sol.alpha[e]) * dirs.gamma[e];
      rhs.row(i) += f.transpose();
      rhs.row(j) -= f.transpose();
    }
    const Eigen::MatrixX3d x = lap.solve(rhs);
    Locations next(g.num_nodes());
    for (int i = 0; i < g.num_nodes(); ++i) next[i] = x.row(i).transpose();
    detail::center(next);

    double change = 0.0, size = 0.0;
    for (int i = 0; i < g.num_nodes(); ++i) {
      change = std::max(change, (next[i] - sol.locations[i]).norm());
      size = std::max(size, next[i].norm());
    }
    sol.locations = std::move(next);
    for (int e = 0; e < g.num_edges(); ++e) {
      const auto [i, j] = g.edge(e);
      sol.alpha[e] = std::max(1.0, (sol.locations[i] - sol.locations[j]).dot(dirs.gamma[e]));
    }
    sol.iterations = it + 1;
    if (change <= opts.alternation_tolerance * size) break;
  }
  return sol;
}

namespace detail {

// Reduced objective phi(t) = min_{alpha >= 1} sum_e w_e |d_e - alpha_e gamma_e|^2,
// d_e = t_i - t_j. The inner minimum is alpha_e = max(1, <d_e, gamma_e>), so
// phi is a convex, continuously differentiable, piecewise quadratic function:
// w_e |P_e d_e|^2 on edges with <d_e, gamma_e> >= 1 (P_e = I - gamma gamma^T)
// and w_e |d_e - gamma_e|^2 on the rest ("clamped").
struct ReducedObjective {
  const ViewGraph& g;
  const DirectionMeasurements& dirs;
  const std::vector<double>& w;  // already scaled

  bool clamped(int e, const Locations& t) const {
    const auto [i, j] = g.edge(e);
    return (t[i] - t[j]).dot(dirs.gamma[e]) < 1.0;
  }

  // Gradient of edge e's term with respect to d_e.
  Vec3 edge_gradient(int e, const Vec3& d) const {
    const Vec3& gamma = dirs.gamma[e];
    const double proj = d.dot(gamma);
    return proj < 1.0 ? Vec3(2.0 * w[e] * (d - gamma)) : Vec3(2.0 * w[e] * (d - proj * gamma));
  }

  double value(const Locations& t) const {
    double f = 0.0;
    for (int e = 0; e < g.num_edges(); ++e) {
      const auto [i, j] = g.edge(e);
      const Vec3 d = t[i] - t[j];
      const double proj = d.dot(dirs.gamma[e]);
      f += w[e] * (proj < 1.0 ? (d - dirs.gamma[e]).squaredNorm() : (d - proj * dirs.gamma[e]).squaredNorm());
    }
    return f;
  }

  // Directional derivative along `step`.
  double slope(const Locations& t, const Locations& step) const {
    double s = 0.0;
    for (int e = 0; e < g.num_edges(); ++e) {
      const auto [i, j] = g.edge(e);
      s += edge_gradient(e, t[i] - t[j]).dot(step[i] - step[j]);
    }
    return s;
  }
};

}  // namespace detail

/// Exact solve of the bound-constrained problem: Newton's method with an
/// Armijo line search on the reduced objective phi(t) (alpha eliminated in
/// closed form). Each Newton point minimizes the quadratic piece selected by
/// the current clamped set, solved directly on all 3n coordinates with a
/// gauge term. The iteration stops once a full step lands on a point with
/// the same clamped set, which is then the exact minimizer.
inline WlsSolution solve_wls_newton(const ViewGraph& g, const DirectionMeasurements& dirs,
                                    const std::vector<double>& w,
                                    const std::optional<WlsSolution>& warm_start,
                                    const WlsOptions& opts) {
  const int n = g.num_nodes();
  const int m = g.num_edges();
  double w_max = 0.0;
  for (double x : w) {
    CYCLESYNC_CHECK(x >= 0.0 && std::isfinite(x), "weights must be finite and nonnegative");
    w_max = std::max(w_max, x);
  }
  CYCLESYNC_CHECK(w_max > 0.0, "all edge weights are zero");
  std::vector<double> ws(m);
  for (int e = 0; e < m; ++e) ws[e] = w[e] / w_max;
  const detail::ReducedObjective phi{g, dirs, ws};

  Locations t(n, Vec3::Zero());
  if (warm_start) {
    CYCLESYNC_CHECK(warm_start->locations.size() == static_cast<std::size_t>(n),
                    "warm start size mismatch");
    t = warm_start->locations;
    detail::center(t);
  }

  WlsSolution sol;
  Eigen::MatrixXd system(3 * n, 3 * n), ridged;
  Eigen::VectorXd rhs(3 * n);
  Eigen::LDLT<Eigen::MatrixXd> ldlt;
  Locations newton(n), trial(n), step(n);
  std::vector<char> clamped(m);
  double f = phi.value(t);
  for (int it = 0; it < opts.max_iterations; ++it) {
    sol.iterations = it + 1;
    system.setZero();
    rhs.setZero();
    for (int e = 0; e < m; ++e) {
      const auto [i, j] = g.edge(e);
      clamped[e] = phi.clamped(e, t) ? 1 : 0;
      const Vec3& gamma = dirs.gamma[e];
      const Eigen::Matrix3d block =
          clamped[e] ? Eigen::Matrix3d(ws[e] * Eigen::Matrix3d::Identity())
                     : Eigen::Matrix3d(ws[e] * (Eigen::Matrix3d::Identity() - gamma * gamma.transpose()));
      system.block<3, 3>(3 * i, 3 * i) += block;
      system.block<3, 3>(3 * j, 3 * j) += block;
      system.block<3, 3>(3 * i, 3 * j) -= block;
      system.block<3, 3>(3 * j, 3 * i) -= block;
      if (clamped[e]) {
        rhs.segment<3>(3 * i) += ws[e] * gamma;
        rhs.segment<3>(3 * j) -= ws[e] * gamma;
      }
    }
    const double c = system.diagonal().mean() / n;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        for (int d = 0; d < 3; ++d) system(3 * i + d, 3 * j + d) += c;
      }
    }
    // A piece made only of projected edges can have a Hessian kernel beyond
    // translations (flexible frameworks); fall back to a growing ridge.
    Eigen::VectorXd x;
    double residual = 0.0;
    bool solved = false;
    const double diag = system.diagonal().mean();
    for (double ridge : {0.0, 1e-12, 1e-10, 1e-8, 1e-6, 1e-4}) {
      ridged = system;
      ridged.diagonal().array() += ridge * diag;
      ldlt.compute(ridged);
      if (ldlt.info() != Eigen::Success) continue;
      x = ldlt.solve(rhs);
      residual = (ridged * x - rhs).norm();
      if (x.allFinite() &&
          residual <= opts.solve_tolerance * (ridged.norm() * x.norm() + rhs.norm())) {
        solved = true;
        break;
      }
    }
    if (!solved) throw Error("linear solve failed, residual norm " + std::to_string(residual));
    for (int i = 0; i < n; ++i) newton[i] = x.segment<3>(3 * i);
    detail::center(newton);

    bool same_piece = true;
    for (int e = 0; e < m && same_piece; ++e) {
      same_piece = (phi.clamped(e, newton) ? 1 : 0) == clamped[e];
    }
    const double f_newton = phi.value(newton);
    if (same_piece) {
      t = newton;
      f = f_newton;
      break;
    }

    for (int i = 0; i < n; ++i) step[i] = newton[i] - t[i];
    const double slope = phi.slope(t, step);
    if (!(slope < 0.0)) break;  // no descent left at working precision
    double s = 1.0;
    double f_trial = f_newton;
    trial = newton;
    while (f_trial > f + 1e-4 * s * slope) {
      s *= 0.5;
      if (s < 1e-12) break;
      for (int i = 0; i < n; ++i) trial[i] = t[i] + s * step[i];
      f_trial = phi.value(trial);
    }
    if (!(f_trial < f)) break;
    t = trial;
    f = f_trial;
  }

  sol.locations = std::move(t);
  sol.alpha.resize(m);
  for (int e = 0; e < m; ++e) {
    const auto [i, j] = g.edge(e);
    sol.alpha[e] = std::max(1.0, (sol.locations[i] - sol.locations[j]).dot(dirs.gamma[e]));
  }
  return sol;
}

inline WlsSolution solve_wls(const ViewGraph& g, const DirectionMeasurements& dirs,
                             const std::vector<double>& w,
                             const std::optional<WlsSolution>& warm_start = std::nullopt,
                             const WlsOptions& opts = {}) {
  CYCLESYNC_CHECK(w.size() == static_cast<std::size_t>(g.num_edges()), "weight count mismatch");
  CYCLESYNC_CHECK(dirs.size() == w.size(), "direction count mismatch");
  CYCLESYNC_CHECK(g.connected(), "gauge not fixable: view graph is disconnected");
  if (opts.method == WlsMethod::kAlternation) {
    return solve_wls_alternating(g, dirs, w, warm_start, opts);
  }
  return solve_wls_newton(g, dirs, w, warm_start, opts);
}

/// Weighted objective sum_ij w_ij |t_i - t_j - alpha_ij gamma_ij|^2.
inline double wls_objective(const ViewGraph& g, const DirectionMeasurements& dirs,
                            const std::vector<double>& w, const WlsSolution& sol) {
  double f = 0.0;
  for (int e = 0; e < g.num_edges(); ++e) {
    const auto [i, j] = g.edge(e);
    f += w[e] *
         (sol.locations[i] - sol.locations[j] - sol.alpha[e] * dirs.gamma[e]).squaredNorm();
  }
  return f;
}

inline std::vector<double> residuals(const ViewGraph& g, const Locations& t,
                                     const std::vector<double>& alpha,
                                     const DirectionMeasurements& dirs) {
  std::vector<double> r(g.num_edges());
  for (int e = 0; e < g.num_edges(); ++e) {
    const auto [i, j] = g.edge(e);
    r[e] = (t[i] - t[j] - alpha[e] * dirs.gamma[e]).norm();
  }
  return r;
}

/// Residual-weighted average of location cycle inconsistencies:
/// s_ij = sum_k exp(-beta (r_ik + r_jk)) d_ijk / Z_ij. Edges outside every
/// triangle fall back to their own residual.
inline std::vector<double> cycle_scores(const ViewGraph& g, const TriangleIndex& tri,
                                        const DirectionMeasurements& dirs, const Locations& t,
                                        const std::vector<double>& r, double beta) {
  CYCLESYNC_CHECK(beta > 0.0, "beta must be positive");
  std::vector<double> s(g.num_edges());
  for (int e = 0; e < g.num_edges(); ++e) {
    const auto entries = tri[e];
    if (entries.empty()) {
      s[e] = r[e];
      continue;
    }
    const auto [i, j] = g.edge(e);
    double min_arg = std::numeric_limits<double>::infinity();
    for (const auto& en : entries) min_arg = std::min(min_arg, r[en.edge_ik] + r[en.edge_jk]);
    double num = 0.0, den = 0.0;
    for (const auto& en : entries) {
      const int k = en.k;
      const Vec3 g_jk = j < k ? dirs.gamma[en.edge_jk] : Vec3(-dirs.gamma[en.edge_jk]);
      const Vec3 g_ki = k < i ? dirs.gamma[en.edge_ik] : Vec3(-dirs.gamma[en.edge_ik]);
      const double d = location_cycle_inconsistency(t[i], t[j], t[k], dirs.gamma[e], g_jk, g_ki);
      const double wk = std::exp(-beta * (r[en.edge_ik] + r[en.edge_jk] - min_arg));
      num += wk * d;
      den += wk;
    }
    s[e] = num / den;
  }
  return s;
}

inline std::vector<double> blend(const std::vector<double>& r, const std::vector<double>& s,
                                 double lambda) {
  CYCLESYNC_CHECK(lambda >= 0.0 && lambda <= 1.0, "lambda_t must lie in [0, 1]");
  CYCLESYNC_CHECK(r.size() == s.size(), "blend size mismatch");
  std::vector<double> h(r.size());
  for (std::size_t e = 0; e < r.size(); ++e) h[e] = (1.0 - lambda) * r[e] + lambda * s[e];
  return h;
}

struct IterationLog {
  int t = 0;
  double lambda = 0.0;
  // Robust objective sum_ij rho(r_ij) after the WLS solve.
  double objective = 0.0;
  double max_change = 0.0;
  int inner_iterations = 0;
};

struct LocationEstimate {
  Locations locations;
  std::vector<double> weight;    // weights used by the final WLS solve
  std::vector<double> residual;
  std::vector<double> score;
  std::vector<double> blended;
  std::vector<double> alpha;
  std::vector<IterationLog> log;
};

/// Outer loop. Without `init_scores` the initial weights come from
/// T-AAB (or are uniform when cfg.init says so).
inline LocationEstimate cycle_sync(const ViewGraph& g, const DirectionMeasurements& dirs,
                                   const SolverConfig& cfg,
                                   const std::optional<EdgeScores>& init_scores = std::nullopt) {
  cfg.validate();
  CYCLESYNC_CHECK(dirs.size() == static_cast<std::size_t>(g.num_edges()),
                  "direction count does not match edge count");
  CYCLESYNC_CHECK(g.connected(), "gauge not fixable: view graph is disconnected");

  std::vector<double> w;
  if (init_scores) {
    CYCLESYNC_CHECK(init_scores->size() == dirs.size(), "init score count mismatch");
    w = initial_weights(*init_scores);
  } else if (cfg.init == WeightInit::kTaab) {
    w = initial_weights(taab_scores(g, dirs, cfg.taab));
  } else {
    w.assign(g.num_edges(), 1.0);
  }

  LocationEstimate est;
  std::optional<WlsSolution> state;
  for (int t = 1; t <= cfg.t_max; ++t) {
    WlsSolution sol = solve_wls(g, dirs, w, state, cfg.wls);
    IterationLog entry;
    entry.t = t;
    entry.lambda = cfg.lambda(t);
    entry.inner_iterations = sol.iterations;
    if (state) {
      for (int i = 0; i < g.num_nodes(); ++i) {
        entry.max_change = std::max(entry.max_change, (sol.locations[i] - state->locations[i]).norm());
      }
    } else {
      entry.max_change = std::numeric_limits<double>::infinity();
    }

    std::vector<double> r = residuals(g, sol.locations, sol.alpha, dirs);
    for (double x : r) entry.objective += robust_loss(x, cfg);
    std::vector<double> s = cycle_scores(g, g.triangles(), dirs, sol.locations, r, cfg.beta);
    std::vector<double> h = blend(r, s, entry.lambda);

    est.weight = w;
    for (int e = 0; e < g.num_edges(); ++e) w[e] = reweight(h[e], cfg);
    est.residual = std::move(r);
    est.score = std::move(s);
    est.blended = std::move(h);
    est.log.push_back(entry);
    state = std::move(sol);
    if (cfg.outer_tolerance > 0.0 && entry.max_change < cfg.outer_tolerance) break;
  }
  est.locations = state->locations;
  est.alpha = state->alpha;
  return est;
}

/// s*_ij = |t*_i - t*_j| |gamma_ij - gamma*_ij|, for diagnostics on data with
/// known ground truth.
inline std::vector<double> corruption_levels(const ViewGraph& g, const Locations& truth,
                                             const DirectionMeasurements& dirs) {
  std::vector<double> s(g.num_edges());
  for (int e = 0; e < g.num_edges(); ++e) {
    const auto [i, j] = g.edge(e);
    const Vec3 diff = truth[i] - truth[j];
    s[e] = diff.norm() * (dirs.gamma[e] - diff.normalized()).norm();
  }
  return s;
}

/// Locations text format: one line "i x y z" per node.
inline void write_locations(std::ostream& out, const Locations& t) {
  for (std::size_t i = 0; i < t.size(); ++i) {
    out << i << ' ' << t[i].x() << ' ' << t[i].y() << ' ' << t[i].z() << '\n';
  }
}

inline void write_locations(const std::string& path, const Locations& t) {
  auto out = detail::open_output(path);
  write_locations(out, t);
}

inline Locations read_locations(std::istream& in, int n) {
  Locations t(n, Vec3::Zero());
  std::vector<char> seen(n, 0);
  std::string line;
  int line_no = 0;
  while (detail::next_line(in, line, line_no)) {
    int i = 0;
    double x = 0, y = 0, z = 0;
    detail::parse_fields(line, line_no, i, x, y, z);
    if (i < 0 || i >= n) detail::parse_error("node out of range", line_no);
    if (seen[i]) detail::parse_error("duplicate node", line_no);
    t[i] = Vec3(x, y, z);
    seen[i] = 1;
  }
  for (int i = 0; i < n; ++i) {
    if (!seen[i]) throw Error("missing location for node " + std::to_string(i));
  }
  return t;
}

inline Locations read_locations(const std::string& path, int n) {
  auto in = detail::open_input(path);
  return read_locations(in, n);
}

}  // namespace cyclesync
