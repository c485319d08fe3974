#pragma once

// Per-triangle geometry on direction measurements.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "cyclesync/error.hpp"
#include "cyclesync/graph.hpp"

namespace cyclesync {

using Vec3 = Eigen::Vector3d;

/// Unit directions gamma_ij, stored for the canonical orientation i < j of
/// each edge (gamma_ji = -gamma_ij).
struct DirectionMeasurements {
  std::vector<Vec3> gamma;
  std::optional<std::vector<Vec3>> truth;
  // corrupt[e] != 0 marks e as a bad edge.
  std::optional<std::vector<char>> corrupt;

  std::size_t size() const { return gamma.size(); }

  void validate(const ViewGraph& g) const {
    CYCLESYNC_CHECK(gamma.size() == static_cast<std::size_t>(g.num_edges()),
                    "direction count does not match edge count");
    for (const Vec3& v : gamma) {
      CYCLESYNC_CHECK(std::abs(v.norm() - 1.0) < 1e-12, "direction is not unit length");
    }
    if (truth) CYCLESYNC_CHECK(truth->size() == gamma.size(), "truth size mismatch");
    if (corrupt) CYCLESYNC_CHECK(corrupt->size() == gamma.size(), "label size mismatch");
  }
};

/// gamma_ab for an arbitrary orientation of a stored edge.
inline Vec3 oriented_direction(const ViewGraph& g, const std::vector<Vec3>& gamma, int a,
                               int b) {
  const int e = g.edge_id(a, b);
  CYCLESYNC_CHECK(e >= 0, "no edge between " + std::to_string(a) + " and " + std::to_string(b));
  return a < b ? gamma[e] : Vec3(-gamma[e]);
}

/// Angle between two unit vectors, in [0, pi].
inline double triangle_angle(const Vec3& u, const Vec3& v) {
  if (std::abs(u.norm() - 1.0) > 1e-9 || std::abs(v.norm() - 1.0) > 1e-9) {
    throw Error("triangle_angle expects unit vectors");
  }
  // atan2 keeps full precision near 0 and pi where acos does not.
  return std::atan2(u.cross(v).norm(), u.dot(v));
}

/// || |ti-tj| gamma_ij + |tj-tk| gamma_jk + |tk-ti| gamma_ki ||
inline double location_cycle_inconsistency(const Vec3& ti, const Vec3& tj, const Vec3& tk,
                                           const Vec3& g_ij, const Vec3& g_jk,
                                           const Vec3& g_ki) {
  return ((ti - tj).norm() * g_ij + (tj - tk).norm() * g_jk + (tk - ti).norm() * g_ki).norm();
}

/// Angular distance (divided by pi) from gamma_ij to the cone of directions
/// that close the cycle with the other two edges, i.e. the set of normalized
/// a(-gamma_jk) + b(-gamma_ki) with a, b >= 0.
///
/// The projection of gamma_ij onto span(gamma_ki, gamma_jk) is
/// a gamma_ki + b gamma_jk with
///   a = (x - yz) / (1 - z^2),  b = (y - xz) / (1 - z^2),
///   x = gamma_ij.gamma_ki,  y = gamma_ij.gamma_jk,  z = gamma_jk.gamma_ki.
/// It lies in the cone iff a <= 0 and b <= 0; the distance is then the angle
/// to the plane. Otherwise the nearest cone point is one of the two rays.
inline double aab_inconsistency(const Vec3& g_ij, const Vec3& g_jk, const Vec3& g_ki) {
  const double z = g_jk.dot(g_ki);
  if (std::abs(z) > 1.0 - 1e-9) throw Error("ill-conditioned triangle");
  const double x = g_ij.dot(g_ki);
  const double y = g_ij.dot(g_jk);
  const double denom = 1.0 - z * z;
  const double a = (x - y * z) / denom;
  const double b = (y - x * z) / denom;
  double angle;
  if (a <= 0.0 && b <= 0.0) {
    const Vec3 proj = a * g_ki + b * g_jk;
    const Vec3 normal = g_jk.cross(g_ki).normalized();
    angle = std::atan2(std::abs(g_ij.dot(normal)), proj.norm());
  } else {
    const auto ray_angle = [&](const Vec3& ray) {
      return std::atan2(g_ij.cross(ray).norm(), g_ij.dot(ray));
    };
    angle = std::min(ray_angle(-g_jk), ray_angle(-g_ki));
  }
  return std::clamp(angle / std::numbers::pi, 0.0, 1.0);
}

/// Triangles whose angle at k (between gamma_ik and gamma_jk) stays within
/// [threshold, pi - threshold].
struct WellShapedIndex {
  TriangleIndex triangles;
  double threshold = 0.0;
};

inline const double kDefaultWellShapedAngle = std::asin(0.6);

inline WellShapedIndex well_shaped_filter(const ViewGraph& g, const TriangleIndex& tri,
                                          const DirectionMeasurements& dirs,
                                          double threshold = kDefaultWellShapedAngle) {
  WellShapedIndex out{TriangleIndex(tri.num_edges()), threshold};
  for (int e = 0; e < g.num_edges(); ++e) {
    const auto [i, j] = g.edge(e);
    for (const auto& entry : tri[e]) {
      const Vec3 g_ik = oriented_direction(g, dirs.gamma, i, entry.k);
      const Vec3 g_jk = oriented_direction(g, dirs.gamma, j, entry.k);
      const double theta = triangle_angle(g_ik, g_jk);
      if (theta >= threshold && theta <= std::numbers::pi - threshold) {
        out.triangles.push(e, entry);
      }
    }
    out.triangles.close_edge(e);
  }
  return out;
}

/// d~_ij,k for every entry of the well-shaped index, laid out in index order.
inline std::vector<double> aab_table(const ViewGraph& g, const WellShapedIndex& ws,
                                     const DirectionMeasurements& dirs) {
  std::vector<double> table;
  table.reserve(ws.triangles.total());
  for (int e = 0; e < g.num_edges(); ++e) {
    const auto [i, j] = g.edge(e);
    for (const auto& entry : ws.triangles[e]) {
      table.push_back(aab_inconsistency(dirs.gamma[e],
                                        oriented_direction(g, dirs.gamma, j, entry.k),
                                        oriented_direction(g, dirs.gamma, entry.k, i)));
    }
  }
  return table;
}

/// Directions text format: one line "i j gx gy gz" per edge of `g`.
/// Vectors are renormalized; a line with i > j stores the reversed vector.
inline DirectionMeasurements read_directions(std::istream& in, const ViewGraph& g) {
  DirectionMeasurements dirs;
  dirs.gamma.assign(g.num_edges(), Vec3::Zero());
  std::vector<char> seen(g.num_edges(), 0);
  std::string line;
  int line_no = 0;
  while (detail::next_line(in, line, line_no)) {
    int i = 0, j = 0;
    double x = 0, y = 0, z = 0;
    detail::parse_fields(line, line_no, i, j, x, y, z);
    const int e = g.edge_id(i, j);
    if (e < 0) detail::parse_error("edge not in graph", line_no);
    if (seen[e]) detail::parse_error("duplicate direction", line_no);
    Vec3 v(x, y, z);
    const double norm = v.norm();
    if (!(norm > 0.0) || !std::isfinite(norm)) detail::parse_error("zero direction", line_no);
    v /= norm;
    dirs.gamma[e] = i < j ? v : Vec3(-v);
    seen[e] = 1;
  }
  for (int e = 0; e < g.num_edges(); ++e) {
    if (!seen[e]) {
      throw Error("missing direction for edge " + std::to_string(g.edge(e).i) + " " +
                  std::to_string(g.edge(e).j));
    }
  }
  return dirs;
}

inline DirectionMeasurements read_directions(const std::string& path, const ViewGraph& g) {
  auto in = detail::open_input(path);
  return read_directions(in, g);
}

inline void write_directions(std::ostream& out, const ViewGraph& g,
                             const std::vector<Vec3>& gamma) {
  for (int e = 0; e < g.num_edges(); ++e) {
    const Vec3& v = gamma[e];
    out << g.edge(e).i << ' ' << g.edge(e).j << ' ' << v.x() << ' ' << v.y() << ' ' << v.z()
        << '\n';
  }
}

inline void write_directions(const std::string& path, const ViewGraph& g,
                             const std::vector<Vec3>& gamma) {
  auto out = detail::open_output(path);
  write_directions(out, g, gamma);
}

}  // namespace cyclesync
