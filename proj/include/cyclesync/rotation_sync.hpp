#pragma once

// MPLS-cycle rotation synchronization. Edge weights come only from
// cycle-based corruption scores (no residual blending): CEMP-style
// reweighted averages of 3-cycle inconsistencies, followed by Jacobi sweeps
// of weighted tangent-space averaging from a maximum-weight spanning tree.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <functional>
#include <queue>
#include <tuple>
#include <vector>

#include "cyclesync/error.hpp"
#include "cyclesync/graph.hpp"
#include "cyclesync/so3.hpp"
#include "cyclesync/taab.hpp"

namespace cyclesync {

/// R_ab for either orientation of a stored edge.
inline Mat3 oriented_rotation(const ViewGraph& g, const std::vector<Mat3>& rel, int a, int b) {
  const int e = g.edge_id(a, b);
  CYCLESYNC_CHECK(e >= 0, "no edge between " + std::to_string(a) + " and " + std::to_string(b));
  return a < b ? rel[e] : Mat3(rel[e].transpose());
}

/// angle(R_ij R_jk R_ki) / pi.
inline double rotation_cycle_inconsistency(const Mat3& r_ij, const Mat3& r_jk, const Mat3& r_ki) {
  return geodesic_angle(Mat3::Identity(), project_to_rotation(r_ij * r_jk * r_ki)) /
         std::numbers::pi;
}

/// Cycle inconsistency for every entry of `tri`, in index order.
inline std::vector<double> rotation_cycle_table(const ViewGraph& g, const TriangleIndex& tri,
                                                const RotationMeasurements& rots) {
  std::vector<double> table;
  table.reserve(tri.total());
  for (int e = 0; e < g.num_edges(); ++e) {
    const auto [i, j] = g.edge(e);
    for (const auto& en : tri[e]) {
      table.push_back(rotation_cycle_inconsistency(rots.rel[e],
                                                   oriented_rotation(g, rots.rel, j, en.k),
                                                   oriented_rotation(g, rots.rel, en.k, i)));
    }
  }
  return table;
}

/// Plain mean of the cycle inconsistencies, then one reweighting pass per
/// entry of `betas`. Triangle-free edges keep `neutral`.
inline EdgeScores cemp_rotation_scores(const ViewGraph& g, const TriangleIndex& tri,
                                       const RotationMeasurements& rots,
                                       const std::vector<double>& betas, double neutral = 0.5) {
  CYCLESYNC_CHECK(!betas.empty(), "beta schedule must not be empty");
  const std::vector<double> d = rotation_cycle_table(g, tri, rots);
  EdgeScores s = detail::plain_average(g, tri, d, neutral);
  EdgeScores next;
  for (double beta : betas) {
    detail::reweighted_average(g, tri, d, s, beta, neutral, next);
    std::swap(s, next);
  }
  return s;
}

struct RotationSyncConfig {
  double beta0 = 1.0;
  double growth = 1.2;
  int cemp_iterations = 10;
  int sweeps = 20;
  double a = 4.0;
  double delta = 1e-8;
  double neutral = 0.5;
  // Keep the CEMP scores fixed during the sweeps instead of continuing the
  // beta schedule.
  bool freeze_scores = false;

  void validate() const {
    CYCLESYNC_CHECK(beta0 > 0.0, "rotation beta0 must be positive");
    CYCLESYNC_CHECK(growth >= 1.0, "rotation growth must be at least 1");
    CYCLESYNC_CHECK(cemp_iterations >= 1, "cemp_iterations must be at least 1");
    CYCLESYNC_CHECK(sweeps >= 0, "sweeps must be nonnegative");
    CYCLESYNC_CHECK(a > 0.0 && delta > 0.0, "a and delta must be positive");
  }
};

namespace detail {

// Breadth-first propagation R_v = R_uv^T R_u along `parent` links, root 0
// fixed to the identity.
inline std::vector<Mat3> propagate_tree(const ViewGraph& g, const std::vector<Mat3>& rel,
                                        const std::vector<std::vector<int>>& children) {
  std::vector<Mat3> out(g.num_nodes(), Mat3::Identity());
  std::queue<int> queue;
  queue.push(0);
  while (!queue.empty()) {
    const int u = queue.front();
    queue.pop();
    for (int v : children[u]) {
      out[v] = oriented_rotation(g, rel, u, v).transpose() * out[u];
      queue.push(v);
    }
  }
  return out;
}

}  // namespace detail

/// Maximum-weight spanning tree (Prim from node 0, ties broken by edge
/// order) and the rotations it induces.
inline std::vector<Mat3> spanning_tree_rotations(const ViewGraph& g, const RotationMeasurements& rots,
                                                 const std::vector<double>& weight) {
  CYCLESYNC_CHECK(g.connected(), "gauge not fixable: view graph is disconnected");
  const int n = g.num_nodes();
  std::vector<char> in_tree(n, 0);
  std::vector<std::vector<int>> children(n);
  using Item = std::tuple<double, int, int, int>;  // (-weight, edge, from, to)
  std::priority_queue<Item, std::vector<Item>, std::greater<Item>> heap;
  auto push_edges = [&](int u) {
    for (int v : g.neighbors(u)) {
      if (!in_tree[v]) {
        const int e = g.edge_id(u, v);
        heap.emplace(-weight[e], e, u, v);
      }
    }
  };
  in_tree[0] = 1;
  push_edges(0);
  while (!heap.empty()) {
    const auto [neg_w, e, u, v] = heap.top();
    heap.pop();
    if (in_tree[v]) continue;
    in_tree[v] = 1;
    children[u].push_back(v);
    push_edges(v);
  }
  return detail::propagate_tree(g, rots.rel, children);
}

/// Unweighted breadth-first spanning tree from node 0: the baseline that
/// trusts whichever edges the traversal meets first.
inline std::vector<Mat3> bfs_tree_rotations(const ViewGraph& g, const RotationMeasurements& rots) {
  CYCLESYNC_CHECK(g.connected(), "gauge not fixable: view graph is disconnected");
  const int n = g.num_nodes();
  std::vector<char> seen(n, 0);
  std::vector<std::vector<int>> children(n);
  std::queue<int> queue;
  queue.push(0);
  seen[0] = 1;
  while (!queue.empty()) {
    const int u = queue.front();
    queue.pop();
    for (int v : g.neighbors(u)) {
      if (!seen[v]) {
        seen[v] = 1;
        children[u].push_back(v);
        queue.push(v);
      }
    }
  }
  return detail::propagate_tree(g, rots.rel, children);
}

struct RotationEstimate {
  std::vector<Mat3> rotations;
  EdgeScores scores;
  std::vector<double> weights;
};

inline RotationEstimate mpls_cycle(const ViewGraph& g, const RotationMeasurements& rots,
                                   const RotationSyncConfig& cfg = {}) {
  cfg.validate();
  CYCLESYNC_CHECK(rots.size() == static_cast<std::size_t>(g.num_edges()),
                  "rotation count does not match edge count");
  CYCLESYNC_CHECK(g.connected(), "gauge not fixable: view graph is disconnected");
  const TriangleIndex& tri = g.triangles();
  const std::vector<double> d = rotation_cycle_table(g, tri, rots);

  EdgeScores s = detail::plain_average(g, tri, d, cfg.neutral);
  EdgeScores next;
  double beta = cfg.beta0;
  for (int t = 0; t < cfg.cemp_iterations; ++t) {
    detail::reweighted_average(g, tri, d, s, beta, cfg.neutral, next);
    std::swap(s, next);
    beta *= cfg.growth;
  }

  std::vector<double> tree_weight(g.num_edges());
  for (int e = 0; e < g.num_edges(); ++e) tree_weight[e] = std::exp(-20.0 * s[e]);
  std::vector<Mat3> r = spanning_tree_rotations(g, rots, tree_weight);

  std::vector<double> w(g.num_edges());
  auto update_weights = [&] {
    for (int e = 0; e < g.num_edges(); ++e) w[e] = std::exp(-cfg.a * s[e]) / (s[e] + cfg.delta);
  };
  update_weights();

  std::vector<Vec3> step(g.num_nodes());
  std::vector<double> wsum(g.num_nodes());
  for (int sweep = 0; sweep < cfg.sweeps; ++sweep) {
    std::fill(step.begin(), step.end(), Vec3::Zero());
    std::fill(wsum.begin(), wsum.end(), 0.0);
    for (int e = 0; e < g.num_edges(); ++e) {
      const auto [i, j] = g.edge(e);
      // R_i ~ R_ij R_j and R_j ~ R_ij^T R_i.
      const Vec3 di = so3_log(rots.rel[e] * r[j] * r[i].transpose());
      const Vec3 dj = so3_log(rots.rel[e].transpose() * r[i] * r[j].transpose());
      step[i] += w[e] * di;
      step[j] += w[e] * dj;
      wsum[i] += w[e];
      wsum[j] += w[e];
    }
    for (int i = 0; i < g.num_nodes(); ++i) {
      if (wsum[i] > 0.0) r[i] = project_to_rotation(so3_exp(step[i] / wsum[i]) * r[i]);
    }
    if (!cfg.freeze_scores) {
      detail::reweighted_average(g, tri, d, s, beta, cfg.neutral, next);
      std::swap(s, next);
      beta *= cfg.growth;
      update_weights();
    }
  }

  // Gauge: the free symmetry of R_ij = R_i R_j^T is R_i -> R_i Q.
  const Mat3 fix = r[0].transpose();
  for (Mat3& x : r) x = project_to_rotation(x * fix);
  r[0] = Mat3::Identity();
  return {std::move(r), std::move(s), std::move(w)};
}

}  // namespace cyclesync
