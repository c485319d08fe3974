#pragma once

// Gauge removal and error reporting.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SVD>

#include "cyclesync/error.hpp"
#include "cyclesync/so3.hpp"

namespace cyclesync {

struct SimilarityAlignment {
  double scale = 1.0;
  Vec3 translation = Vec3::Zero();
  double objective = 0.0;
  int iterations = 0;
};

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + mid);
  return 0.5 * (lower + upper);
}

inline double mean(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double alignment_objective(const std::vector<Vec3>& est, const std::vector<Vec3>& gt,
                                  double c, const Vec3& t) {
  double f = 0.0;
  for (std::size_t i = 0; i < est.size(); ++i) f += (gt[i] - (c * est[i] + t)).norm();
  return f;
}

/// argmin over (c, t) of sum_i |gt_i - (c est_i + t)|, by IRLS with weights
/// 1 / max(|residual_i|, 1e-12).
inline SimilarityAlignment align_similarity(const std::vector<Vec3>& est,
                                            const std::vector<Vec3>& gt,
                                            int max_iterations = 200) {
  CYCLESYNC_CHECK(est.size() == gt.size(), "alignment inputs differ in length");
  CYCLESYNC_CHECK(est.size() >= 2, "alignment needs at least two points");
  const std::size_t n = est.size();
  double spread = 0.0;
  for (std::size_t i = 1; i < n; ++i) spread = std::max(spread, (est[i] - est[0]).norm());
  CYCLESYNC_CHECK(spread > 0.0, "degenerate estimate: all points coincide");

  std::vector<double> w(n, 1.0);
  SimilarityAlignment out;
  double prev = std::numeric_limits<double>::infinity();
  for (int it = 0; it < max_iterations; ++it) {
    double wsum = 0.0;
    Vec3 e_bar = Vec3::Zero(), g_bar = Vec3::Zero();
    for (std::size_t i = 0; i < n; ++i) {
      wsum += w[i];
      e_bar += w[i] * est[i];
      g_bar += w[i] * gt[i];
    }
    e_bar /= wsum;
    g_bar /= wsum;
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const Vec3 de = est[i] - e_bar;
      num += w[i] * de.dot(gt[i] - g_bar);
      den += w[i] * de.squaredNorm();
    }
    // All weight on a single point leaves the scale undetermined; keep it.
    if (den > 0.0) out.scale = num / den;
    out.translation = g_bar - out.scale * e_bar;
    out.iterations = it + 1;

    out.objective = alignment_objective(est, gt, out.scale, out.translation);
    for (std::size_t i = 0; i < n; ++i) {
      const double res = (gt[i] - (out.scale * est[i] + out.translation)).norm();
      w[i] = 1.0 / std::max(res, 1e-12);
    }
    if (std::isfinite(prev) && std::abs(prev - out.objective) <= 1e-12 * std::max(prev, 1e-300)) break;
    prev = out.objective;
  }
  return out;
}

/// argmin over R in SO(3) of sum_i |gt_i - R est_i|_F^2.
inline Mat3 align_rotations(const std::vector<Mat3>& est, const std::vector<Mat3>& gt) {
  CYCLESYNC_CHECK(est.size() == gt.size() && !est.empty(), "rotation alignment size mismatch");
  Mat3 m = Mat3::Zero();
  for (std::size_t i = 0; i < est.size(); ++i) m += gt[i] * est[i].transpose();
  return project_to_rotation(m);
}

inline double rotation_alignment_objective(const std::vector<Mat3>& est,
                                           const std::vector<Mat3>& gt, const Mat3& r) {
  double f = 0.0;
  for (std::size_t i = 0; i < est.size(); ++i) f += (gt[i] - r * est[i]).squaredNorm();
  return f;
}

struct AlignmentResult {
  double scale = 1.0;
  Vec3 translation = Vec3::Zero();
  std::optional<Mat3> rotation;
  std::vector<double> errors;
  double mean_error = 0.0;
  double median_error = 0.0;
};

/// Per-camera |gt_i - (c R est_i + t)|, with R = I when no rotation is given.
inline AlignmentResult pose_errors(const std::vector<Vec3>& est, const std::vector<Vec3>& gt,
                                   const SimilarityAlignment& alignment,
                                   const std::optional<Mat3>& rotation = std::nullopt) {
  CYCLESYNC_CHECK(est.size() == gt.size(), "pose_errors size mismatch");
  AlignmentResult out;
  out.scale = alignment.scale;
  out.translation = alignment.translation;
  out.rotation = rotation;
  const Mat3 r = rotation.value_or(Mat3::Identity());
  out.errors.resize(est.size());
  for (std::size_t i = 0; i < est.size(); ++i) {
    out.errors[i] = (gt[i] - (alignment.scale * (r * est[i]) + alignment.translation)).norm();
  }
  out.mean_error = mean(out.errors);
  out.median_error = median(out.errors);
  return out;
}

/// Convenience: similarity alignment followed by per-camera errors.
inline AlignmentResult location_errors(const std::vector<Vec3>& est,
                                       const std::vector<Vec3>& gt) {
  return pose_errors(est, gt, align_similarity(est, gt));
}

struct RotationErrors {
  Mat3 alignment = Mat3::Identity();
  std::vector<double> errors_deg;
  double mean_deg = 0.0;
  double median_deg = 0.0;
};

/// Errors of absolute rotations estimated from R_ij = R_i R_j^T data, whose
/// gauge is a common right factor: R_i Q. The Procrustes fit therefore runs
/// on the transposes, and error_i = angle(gt_i, est_i Q).
inline RotationErrors rotation_errors(const std::vector<Mat3>& est, const std::vector<Mat3>& gt) {
  CYCLESYNC_CHECK(est.size() == gt.size() && !est.empty(), "rotation error size mismatch");
  std::vector<Mat3> est_t(est.size()), gt_t(gt.size());
  for (std::size_t i = 0; i < est.size(); ++i) {
    est_t[i] = est[i].transpose();
    gt_t[i] = gt[i].transpose();
  }
  RotationErrors out;
  out.alignment = align_rotations(est_t, gt_t).transpose();
  out.errors_deg.resize(est.size());
  for (std::size_t i = 0; i < est.size(); ++i) {
    out.errors_deg[i] =
        geodesic_angle(gt[i], project_to_rotation(est[i] * out.alignment)) * 180.0 / std::numbers::pi;
  }
  out.mean_deg = mean(out.errors_deg);
  out.median_deg = median(out.errors_deg);
  return out;
}

/// Median translation error strictly below 1e-4.
inline bool exact_recovery(const AlignmentResult& result) { return result.median_error < 1e-4; }

}  // namespace cyclesync
