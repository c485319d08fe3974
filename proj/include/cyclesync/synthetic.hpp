#pragma once

// Seeded generators for Erdos-Renyi view graphs with Gaussian camera
// locations, and the uniform / adversarial corruption models.
//
// Every random quantity is drawn from its own sub-stream, seeded by
// splitmix64(seed ^ splitmix64(tag)). Changing q therefore leaves the graph,
// the locations and the per-edge noise untouched, and the corrupted edge set
// grows monotonically with q.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "cyclesync/direction_cycles.hpp"
#include "cyclesync/error.hpp"
#include "cyclesync/graph.hpp"
#include "cyclesync/so3.hpp"

namespace cyclesync {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t value) {
  return splitmix64(seed ^ splitmix64(value + 0x632be59bd9b4e019ULL));
}

enum class Stream : std::uint64_t {
  kLocations = 1,
  kGraph = 2,
  kNoise = 3,
  kCorruptionFlags = 4,
  kAlternateLocations = 5,
  kRotations = 6,
  kRotationNoise = 7,
  kCorruptRotations = 8,
};

/// mt19937_64 with portable uniform and normal draws (the standard
/// distributions are implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  Rng(std::uint64_t seed, Stream stream)
      : engine_(hash_combine(seed, static_cast<std::uint64_t>(stream))) {}

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    spare_ = radius * std::sin(2.0 * std::numbers::pi * u2);
    has_spare_ = true;
    return radius * std::cos(2.0 * std::numbers::pi * u2);
  }

  Vec3 normal3() {
    const double x = normal();
    const double y = normal();
    const double z = normal();
    return {x, y, z};
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

enum class CorruptionModel { kUniform, kAdversarial };

inline std::string to_string(CorruptionModel m) {
  return m == CorruptionModel::kUniform ? "uniform" : "adversarial";
}

inline CorruptionModel parse_corruption_model(const std::string& name) {
  if (name == "uniform" || name == "ucm") return CorruptionModel::kUniform;
  if (name == "adversarial") return CorruptionModel::kAdversarial;
  throw Error("unknown corruption model '" + name + "'");
}

struct SyntheticScenario {
  int n = 100;
  double p = 0.5;
  double q = 0.0;
  double sigma = 0.0;
  CorruptionModel model = CorruptionModel::kUniform;
  std::uint64_t seed = 0;

  void validate() const {
    CYCLESYNC_CHECK(n >= 2, "scenario needs at least two cameras");
    CYCLESYNC_CHECK(p > 0.0 && p <= 1.0, "p must lie in (0, 1]");
    CYCLESYNC_CHECK(q >= 0.0 && q <= 1.0, "q must lie in [0, 1]");
    CYCLESYNC_CHECK(sigma >= 0.0, "sigma must be nonnegative");
    CYCLESYNC_CHECK(model != CorruptionModel::kAdversarial || q < 0.5,
                    "adversarial corruption requires q < 0.5");
  }
};

struct GroundTruth {
  std::vector<Vec3> locations;
  std::vector<Mat3> rotations;
  std::vector<Vec3> directions;
  std::vector<char> corrupt;
};

struct LocationScenario {
  ViewGraph graph;
  GroundTruth truth;
  DirectionMeasurements dirs;
  bool connected = false;
};

inline ViewGraph sample_erdos_renyi(int n, double p, std::uint64_t seed) {
  Rng rng(seed, Stream::kGraph);
  std::vector<Edge> edges;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (rng.uniform() < p) edges.push_back({i, j});
    }
  }
  return build_view_graph(n, edges);
}

inline std::vector<Vec3> sample_locations(int n, Rng& rng) {
  std::vector<Vec3> t(n);
  for (Vec3& x : t) x = rng.normal3();
  return t;
}

inline Vec3 normalized_or_throw(const Vec3& v) {
  const double norm = v.norm();
  CYCLESYNC_CHECK(norm > 0.0, "degenerate direction in scenario");
  return v / norm;
}

inline LocationScenario sample_scenario(const SyntheticScenario& scn) {
  scn.validate();
  LocationScenario out;
  out.graph = sample_erdos_renyi(scn.n, scn.p, scn.seed);
  out.connected = out.graph.connected();

  Rng loc_rng(scn.seed, Stream::kLocations);
  out.truth.locations = sample_locations(scn.n, loc_rng);
  std::vector<Vec3> alternate;
  if (scn.model == CorruptionModel::kAdversarial) {
    Rng alt_rng(scn.seed, Stream::kAlternateLocations);
    alternate = sample_locations(scn.n, alt_rng);
  }

  Rng noise_rng(scn.seed, Stream::kNoise);
  Rng flag_rng(scn.seed, Stream::kCorruptionFlags);
  const int m = out.graph.num_edges();
  out.truth.directions.resize(m);
  out.truth.corrupt.resize(m);
  out.dirs.gamma.resize(m);
  const auto& t = out.truth.locations;
  for (int e = 0; e < m; ++e) {
    const auto [i, j] = out.graph.edge(e);
    const Vec3 eps = noise_rng.normal3();
    const bool corrupt = flag_rng.uniform() < scn.q;
    out.truth.directions[e] = normalized_or_throw(t[i] - t[j]);
    out.truth.corrupt[e] = corrupt ? 1 : 0;
    Vec3 raw;
    if (!corrupt) {
      raw = t[i] - t[j] + scn.sigma * eps;
    } else if (scn.model == CorruptionModel::kUniform) {
      raw = eps;
    } else {
      raw = alternate[i] - alternate[j] + scn.sigma * eps;
    }
    // sigma = 0 keeps clean directions bit-identical to the truth.
    out.dirs.gamma[e] =
        (!corrupt && scn.sigma == 0.0) ? out.truth.directions[e] : normalized_or_throw(raw);
  }
  out.dirs.truth = out.truth.directions;
  out.dirs.corrupt = out.truth.corrupt;
  return out;
}

/// Alternate location set used by the adversarial model, for diagnostics.
inline std::vector<Vec3> adversarial_locations(const SyntheticScenario& scn) {
  Rng alt_rng(scn.seed, Stream::kAlternateLocations);
  return sample_locations(scn.n, alt_rng);
}

/// Uniform rotation from a normalized Gaussian quaternion.
inline Mat3 random_rotation(Rng& rng) {
  Eigen::Vector4d q;
  do {
    for (int c = 0; c < 4; ++c) q[c] = rng.normal();
  } while (q.norm() < 1e-12);
  q.normalize();
  return Eigen::Quaterniond(q[0], q[1], q[2], q[3]).toRotationMatrix();
}

struct RotationScenario {
  ViewGraph graph;
  GroundTruth truth;
  RotationMeasurements rots;
  bool connected = false;
};

/// Clean edges carry R*_i R*_j^T times an axis-angle perturbation of angle
/// |N(0, sigma_rot)| about a uniform axis; corrupted edges an independent
/// uniform rotation.
inline RotationScenario sample_rotation_scenario(int n, double p, double q, double sigma_rot,
                                                 std::uint64_t seed) {
  SyntheticScenario check{n, p, q, 0.0, CorruptionModel::kUniform, seed};
  check.validate();
  CYCLESYNC_CHECK(sigma_rot >= 0.0, "sigma_rot must be nonnegative");
  RotationScenario out;
  out.graph = sample_erdos_renyi(n, p, seed);
  out.connected = out.graph.connected();
  Rng rot_rng(seed, Stream::kRotations);
  out.truth.rotations.resize(n);
  for (Mat3& r : out.truth.rotations) r = random_rotation(rot_rng);

  Rng noise_rng(seed, Stream::kRotationNoise);
  Rng flag_rng(seed, Stream::kCorruptionFlags);
  Rng bad_rng(seed, Stream::kCorruptRotations);
  const int m = out.graph.num_edges();
  out.rots.rel.resize(m);
  out.truth.corrupt.resize(m);
  for (int e = 0; e < m; ++e) {
    const auto [i, j] = out.graph.edge(e);
    const Vec3 axis = noise_rng.normal3();
    const double angle = std::abs(sigma_rot * noise_rng.normal());
    const Mat3 bad = random_rotation(bad_rng);
    const bool corrupt = flag_rng.uniform() < q;
    out.truth.corrupt[e] = corrupt ? 1 : 0;
    const Mat3 clean = out.truth.rotations[i] * out.truth.rotations[j].transpose();
    if (corrupt) {
      out.rots.rel[e] = bad;
    } else if (angle == 0.0) {
      out.rots.rel[e] = clean;
    } else {
      out.rots.rel[e] = Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix() * clean;
    }
  }
  out.rots.corrupt = out.truth.corrupt;
  return out;
}

}  // namespace cyclesync
