#pragma once

// Truncated AAB: iteratively reweighted averaging of the angular cycle
// inconsistencies d~_ij,k over well-shaped triangles.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "cyclesync/direction_cycles.hpp"
#include "cyclesync/error.hpp"
#include "cyclesync/graph.hpp"

namespace cyclesync {

struct TaabConfig {
  double beta0 = 5.0;
  double growth = 1.2;
  int iterations = 10;
  // Score assigned to edges that have no well-shaped triangle.
  double neutral = 0.5;
  double angle_threshold = kDefaultWellShapedAngle;

  void validate() const {
    CYCLESYNC_CHECK(beta0 > 0.0, "taab.beta0 must be positive");
    CYCLESYNC_CHECK(growth > 1.0, "taab.growth must exceed 1");
    CYCLESYNC_CHECK(iterations >= 1, "taab.iters must be at least 1");
    CYCLESYNC_CHECK(neutral >= 0.0 && neutral <= 1.0, "taab.neutral must lie in [0, 1]");
    CYCLESYNC_CHECK(angle_threshold > 0.0 && angle_threshold < std::numbers::pi / 2,
                    "taab.angle_threshold must lie in (0, pi/2)");
  }
};

using EdgeScores = std::vector<double>;

/// C_alpha = 2 (cos a + sqrt(5 - 4 cos^2 a)) / sin^2 a.
inline double theorem_constants(double alpha) {
  const double s = std::sin(alpha);
  if (!(alpha > 0.0 && alpha < std::numbers::pi) || std::abs(s) < 1e-15) {
    throw Error("singular C_alpha");
  }
  const double c = std::cos(alpha);
  return 2.0 * (c + std::sqrt(5.0 - 4.0 * c * c)) / (s * s);
}

namespace detail {

// One reweighting pass: every edge's new score is the softmin-weighted mean
// of its d~ values, with weights exp(-beta (s_ik + s_jk)). The exponent is
// shifted by its minimum per edge, which leaves the convex weights unchanged.
template <typename Values>
void reweighted_average(const ViewGraph& g, const TriangleIndex& tri, const Values& d,
                        const EdgeScores& prev, double beta, double neutral,
                        EdgeScores& next) {
  next.resize(prev.size());
  std::size_t offset = 0;
  for (int e = 0; e < g.num_edges(); ++e) {
    const auto entries = tri[e];
    if (entries.empty()) {
      next[e] = neutral;
      continue;
    }
    double min_arg = std::numeric_limits<double>::infinity();
    for (const auto& en : entries) min_arg = std::min(min_arg, prev[en.edge_ik] + prev[en.edge_jk]);
    double num = 0.0, den = 0.0;
    for (std::size_t n = 0; n < entries.size(); ++n) {
      const auto& en = entries[n];
      const double w = std::exp(-beta * (prev[en.edge_ik] + prev[en.edge_jk] - min_arg));
      num += w * d[offset + n];
      den += w;
    }
    next[e] = num / den;
    offset += entries.size();
  }
}

template <typename Values>
EdgeScores plain_average(const ViewGraph& g, const TriangleIndex& tri, const Values& d,
                         double neutral) {
  EdgeScores s(g.num_edges(), neutral);
  std::size_t offset = 0;
  for (int e = 0; e < g.num_edges(); ++e) {
    const std::size_t count = tri.size(e);
    if (count == 0) continue;
    double sum = 0.0;
    for (std::size_t n = 0; n < count; ++n) sum += d[offset + n];
    s[e] = sum / static_cast<double>(count);
    offset += count;
  }
  return s;
}

}  // namespace detail

/// Scores for iterations 0..T; entry t holds s~^t for every edge.
inline std::vector<EdgeScores> taab_history(const ViewGraph& g, const WellShapedIndex& ws,
                                            const std::vector<double>& aab,
                                            const TaabConfig& cfg) {
  cfg.validate();
  CYCLESYNC_CHECK(aab.size() == ws.triangles.total(), "d~ table does not match index");
  std::vector<EdgeScores> history;
  history.reserve(cfg.iterations + 1);
  history.push_back(detail::plain_average(g, ws.triangles, aab, cfg.neutral));
  double beta = cfg.beta0;
  for (int t = 0; t < cfg.iterations; ++t) {
    EdgeScores next;
    detail::reweighted_average(g, ws.triangles, aab, history.back(), beta, cfg.neutral, next);
    history.push_back(std::move(next));
    beta *= cfg.growth;
  }
  return history;
}

inline EdgeScores taab_scores(const ViewGraph& g, const WellShapedIndex& ws,
                              const std::vector<double>& aab, const TaabConfig& cfg) {
  return taab_history(g, ws, aab, cfg).back();
}

/// Runs the full initializer from raw directions.
inline EdgeScores taab_scores(const ViewGraph& g, const DirectionMeasurements& dirs,
                              const TaabConfig& cfg) {
  const WellShapedIndex ws = well_shaped_filter(g, g.triangles(), dirs, cfg.angle_threshold);
  return taab_scores(g, ws, aab_table(g, ws, dirs), cfg);
}

inline std::vector<double> initial_weights(const EdgeScores& scores) {
  std::vector<double> w(scores.size());
  std::transform(scores.begin(), scores.end(), w.begin(),
                 [](double s) { return std::exp(-20.0 * s); });
  return w;
}

/// s~*_ij = angle(gamma_ij, gamma*_ij) / pi.
inline EdgeScores angular_corruption(const DirectionMeasurements& dirs) {
  CYCLESYNC_CHECK(dirs.truth.has_value(), "angular corruption needs ground-truth directions");
  EdgeScores s(dirs.size());
  for (std::size_t e = 0; e < dirs.size(); ++e) {
    const Vec3& a = dirs.gamma[e];
    const Vec3& b = (*dirs.truth)[e];
    s[e] = std::atan2(a.cross(b).norm(), a.dot(b)) / std::numbers::pi;
  }
  return s;
}

/// Constants of the separation guarantee measured on a labelled instance,
/// with N_ij taken to be the well-shaped triangle set.
struct TheoremInstance {
  double alpha = 0.0;
  double lambda = 0.0;
  double mu = 0.0;
  double c_alpha = 0.0;
  bool hypotheses_hold = false;
  // Admissible schedule: beta0 <= 1 / (2 lambda), 1 < r < r_max.
  double beta0_max = std::numeric_limits<double>::infinity();
  double r_max = std::numeric_limits<double>::infinity();
  std::string reason;

  /// Right-hand side of the lambda hypothesis.
  double lambda_limit() const {
    const double ec = std::numbers::e * c_alpha;
    return 1.0 + ec / mu - std::sqrt(ec * (2.0 * mu + ec)) / mu;
  }
};

inline TheoremInstance measure_theorem_instance(const ViewGraph& g, const WellShapedIndex& ws,
                                                const std::vector<double>& aab,
                                                const DirectionMeasurements& dirs) {
  CYCLESYNC_CHECK(dirs.corrupt.has_value() && dirs.truth.has_value(),
                  "theorem instance needs labels and ground truth");
  const auto& bad = *dirs.corrupt;
  const EdgeScores s_star = angular_corruption(dirs);
  TheoremInstance inst;

  double min_angle = std::numbers::pi / 2;
  double lambda = 0.0;
  double mu = std::numeric_limits<double>::infinity();
  bool any_bad = false;
  std::size_t offset = 0;
  for (int e = 0; e < g.num_edges(); ++e) {
    const auto [i, j] = g.edge(e);
    const auto entries = ws.triangles[e];
    if (entries.empty()) {
      inst.reason = "edge without well-shaped triangles";
      return inst;
    }
    std::size_t n_bad = 0, n_good = 0;
    double good_sum = 0.0;
    for (std::size_t n = 0; n < entries.size(); ++n) {
      const auto& en = entries[n];
      if (bad[en.edge_ik] || bad[en.edge_jk]) {
        ++n_bad;
      } else {
        ++n_good;
        good_sum += aab[offset + n];
      }
      if (!bad[e]) {
        const double theta = triangle_angle(oriented_direction(g, dirs.gamma, i, en.k),
                                            oriented_direction(g, dirs.gamma, j, en.k));
        min_angle = std::min({min_angle, theta, std::numbers::pi - theta});
      }
    }
    lambda = std::max(lambda, static_cast<double>(n_bad) / static_cast<double>(entries.size()));
    if (bad[e]) {
      any_bad = true;
      const double ratio =
          n_good == 0 ? 0.0 : good_sum / (static_cast<double>(n_good) * s_star[e]);
      mu = std::min(mu, ratio);
    }
    offset += entries.size();
  }
  // The angle condition is strict.
  inst.alpha = min_angle * (1.0 - 1e-9);
  inst.c_alpha = theorem_constants(inst.alpha);
  inst.lambda = lambda;
  if (!any_bad) {
    inst.mu = std::numeric_limits<double>::infinity();
    inst.hypotheses_hold = true;
    return inst;
  }
  inst.mu = mu;
  if (!(mu > 0.0)) {
    inst.reason = "mu is zero";
    return inst;
  }
  if (!(lambda < inst.lambda_limit())) {
    inst.reason = "lambda " + std::to_string(lambda) + " exceeds limit " +
                  std::to_string(inst.lambda_limit());
    return inst;
  }
  inst.hypotheses_hold = true;
  if (lambda > 0.0) {
    inst.beta0_max = 1.0 / (2.0 * lambda);
    inst.r_max = mu * (1.0 - lambda) * (1.0 - lambda) /
                 (2.0 * std::numbers::e * inst.c_alpha * lambda);
  }
  return inst;
}

/// Smallest slack of the two separation bounds over iterations 0..T. A
/// negative slack is a violation.
struct TheoremBoundReport {
  double good_margin = std::numeric_limits<double>::infinity();
  double bad_margin = std::numeric_limits<double>::infinity();
  int violations = 0;
};

inline TheoremBoundReport check_theorem_bounds(const std::vector<EdgeScores>& history,
                                               const DirectionMeasurements& dirs,
                                               const TheoremInstance& inst, double beta0,
                                               double growth) {
  const auto& bad = *dirs.corrupt;
  const EdgeScores s_star = angular_corruption(dirs);
  TheoremBoundReport report;
  for (std::size_t t = 0; t < history.size(); ++t) {
    const double good_bound = 1.0 / (2.0 * beta0 * std::pow(growth, static_cast<double>(t)));
    for (std::size_t e = 0; e < s_star.size(); ++e) {
      const double s = history[t][e];
      if (bad[e]) {
        const double margin = s - inst.mu / std::numbers::e * (1.0 - inst.lambda) * s_star[e];
        report.bad_margin = std::min(report.bad_margin, margin);
        if (margin < -1e-12) ++report.violations;
      } else {
        const double margin = good_bound - s;
        report.good_margin = std::min(report.good_margin, margin);
        if (margin < -1e-12) ++report.violations;
      }
    }
  }
  return report;
}

}  // namespace cyclesync
