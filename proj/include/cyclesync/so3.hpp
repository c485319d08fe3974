#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <Eigen/SVD>

#include "cyclesync/error.hpp"
#include "cyclesync/graph.hpp"

namespace cyclesync {

using Mat3 = Eigen::Matrix3d;
using Vec3 = Eigen::Vector3d;

/// Relative rotations R_ij = R_i R_j^T stored for canonical i < j.
struct RotationMeasurements {
  std::vector<Mat3> rel;
  std::optional<std::vector<char>> corrupt;
  std::size_t size() const { return rel.size(); }
};

inline bool is_rotation(const Mat3& r, double tol = 1e-9) {
  return (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff() <= tol &&
         std::abs(r.determinant() - 1.0) <= tol;
}

/// Angle of R1^T R2, in [0, pi].
inline double geodesic_angle(const Mat3& r1, const Mat3& r2) {
  if (!is_rotation(r1) || !is_rotation(r2)) throw Error("geodesic_angle expects rotations");
  const Mat3 d = r1.transpose() * r2;
  // The skew part keeps precision for small angles where acos of the trace
  // does not.
  const double sin_part = 0.5 * Vec3(d(2, 1) - d(1, 2), d(0, 2) - d(2, 0), d(1, 0) - d(0, 1)).norm();
  const double cos_part = std::clamp(0.5 * (d.trace() - 1.0), -1.0, 1.0);
  return std::atan2(sin_part, cos_part);
}

/// Nearest rotation in Frobenius norm.
inline Mat3 project_to_rotation(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  d(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0 ? -1.0 : 1.0;
  return svd.matrixU() * d * svd.matrixV().transpose();
}

inline Vec3 so3_log(const Mat3& r) {
  const Eigen::AngleAxisd aa(r);
  return aa.angle() * aa.axis();
}

inline Mat3 so3_exp(const Vec3& w) {
  const double angle = w.norm();
  if (angle == 0.0) return Mat3::Identity();
  return Eigen::AngleAxisd(angle, w / angle).toRotationMatrix();
}

inline Mat3 rotation_z(double angle) {
  return Eigen::AngleAxisd(angle, Vec3::UnitZ()).toRotationMatrix();
}

namespace detail {

inline void write_matrix_row_major(std::ostream& out, const Mat3& r) {
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b) out << ' ' << r(a, b);
  }
}

}  // namespace detail

/// Rotations text format: one line "i j r11 r12 ... r33" (row-major) per
/// edge; a line with i > j stores R_ij, so R_ji = R_ij^T is kept.
inline std::vector<Mat3> read_relative_rotations(std::istream& in, const ViewGraph& g) {
  std::vector<Mat3> rel(g.num_edges(), Mat3::Zero());
  std::vector<char> seen(g.num_edges(), 0);
  std::string line;
  int line_no = 0;
  while (detail::next_line(in, line, line_no)) {
    int i = 0, j = 0;
    Mat3 r;
    detail::parse_fields(line, line_no, i, j, r(0, 0), r(0, 1), r(0, 2), r(1, 0), r(1, 1),
                         r(1, 2), r(2, 0), r(2, 1), r(2, 2));
    const int e = g.edge_id(i, j);
    if (e < 0) detail::parse_error("edge not in graph", line_no);
    if (seen[e]) detail::parse_error("duplicate rotation", line_no);
    if (!is_rotation(r, 1e-6)) detail::parse_error("not a rotation matrix", line_no);
    r = project_to_rotation(r);
    rel[e] = i < j ? r : Mat3(r.transpose());
    seen[e] = 1;
  }
  for (int e = 0; e < g.num_edges(); ++e) {
    if (!seen[e]) throw Error("missing rotation for edge " + std::to_string(e));
  }
  return rel;
}

inline std::vector<Mat3> read_relative_rotations(const std::string& path, const ViewGraph& g) {
  auto in = detail::open_input(path);
  return read_relative_rotations(in, g);
}

inline void write_relative_rotations(std::ostream& out, const ViewGraph& g,
                                     const std::vector<Mat3>& rel) {
  for (int e = 0; e < g.num_edges(); ++e) {
    out << g.edge(e).i << ' ' << g.edge(e).j;
    detail::write_matrix_row_major(out, rel[e]);
    out << '\n';
  }
}

/// Absolute rotations: one line "i r11 ... r33" per node.
inline void write_absolute_rotations(std::ostream& out, const std::vector<Mat3>& rots) {
  for (std::size_t i = 0; i < rots.size(); ++i) {
    out << i;
    detail::write_matrix_row_major(out, rots[i]);
    out << '\n';
  }
}

inline std::vector<Mat3> read_absolute_rotations(std::istream& in, int n) {
  std::vector<Mat3> rots(n, Mat3::Zero());
  std::vector<char> seen(n, 0);
  std::string line;
  int line_no = 0;
  while (detail::next_line(in, line, line_no)) {
    int i = 0;
    Mat3 r;
    detail::parse_fields(line, line_no, i, r(0, 0), r(0, 1), r(0, 2), r(1, 0), r(1, 1),
                         r(1, 2), r(2, 0), r(2, 1), r(2, 2));
    if (i < 0 || i >= n) detail::parse_error("node out of range", line_no);
    if (seen[i]) detail::parse_error("duplicate node", line_no);
    if (!is_rotation(r, 1e-6)) detail::parse_error("not a rotation matrix", line_no);
    rots[i] = project_to_rotation(r);
    seen[i] = 1;
  }
  for (int i = 0; i < n; ++i) {
    if (!seen[i]) throw Error("missing rotation for node " + std::to_string(i));
  }
  return rots;
}

}  // namespace cyclesync
