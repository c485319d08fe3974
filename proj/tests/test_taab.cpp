#include <numbers>

#include <gtest/gtest.h>

#include "cyclesync/harness.hpp"
#include "cyclesync/taab.hpp"
#include "support/planted.hpp"
#include "support/properties.hpp"

using namespace cyclesync;
using planted::Planted;

namespace {

constexpr double kPi = std::numbers::pi;

}  // namespace

TEST(TheoremConstants, Examples) {
  EXPECT_NEAR(theorem_constants(kPi / 2), 2 * std::sqrt(5.0), 1e-12);
  EXPECT_NEAR(theorem_constants(kPi / 2), 4.472136, 1e-6);
  EXPECT_NEAR(theorem_constants(std::asin(0.6)), 2 * (0.8 + std::sqrt(2.44)) / 0.36, 1e-12);
  EXPECT_NEAR(theorem_constants(std::asin(0.6)), 13.1225, 1e-4);
  try {
    theorem_constants(0.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("singular"), std::string::npos);
  }
  EXPECT_THROW(theorem_constants(kPi), Error);
}

TEST(InitialWeights, Examples) {
  const auto w = initial_weights({0.0, 1.0, 0.1});
  EXPECT_EQ(w[0], 1.0);
  EXPECT_NEAR(w[1], 2.061154e-9, 1e-15);
  EXPECT_NEAR(w[2], 0.135335, 1e-6);
}

TEST(Taab, CleanDataScoresZero) {
  Rng rng(1);
  for (int c = 0; c < 20; ++c) {
    auto s = props::small_instance(rng);
    s.dirs = props::noisy_directions(s.g, s.t, 0.0, rng);
    s.ws = well_shaped_filter(s.g, s.g.triangles(), s.dirs);
    s.aab = aab_table(s.g, s.ws, s.dirs);
    const auto hist = taab_history(s.g, s.ws, s.aab, TaabConfig{});
    for (const auto& scores : hist) {
      for (int e = 0; e < s.g.num_edges(); ++e) {
        if (s.ws.triangles.size(e) > 0) EXPECT_NEAR(scores[e], 0.0, 1e-7);
      }
    }
  }
}

TEST(Taab, NeutralScoreWithoutWellShapedTriangles) {
  const ViewGraph g = build_view_graph(3, {{0, 1}, {1, 2}});
  DirectionMeasurements d;
  d.gamma = {Vec3::UnitX(), Vec3::UnitY()};
  const auto s = taab_scores(g, d, TaabConfig{});
  EXPECT_EQ(s, (EdgeScores{0.5, 0.5}));
}

TEST(Taab, HandComputedSchedule) {
  // Two reweighting steps recomputed directly from the d~ table.
  Rng rng(2);
  const auto s = props::small_instance(rng, 6, 1);
  TaabConfig cfg;
  cfg.iterations = 2;
  cfg.beta0 = 3.0;
  cfg.growth = 1.5;
  const auto hist = taab_history(s.g, s.ws, s.aab, cfg);
  ASSERT_EQ(hist.size(), 3u);
  std::vector<std::size_t> offset(s.g.num_edges() + 1, 0);
  for (int e = 0; e < s.g.num_edges(); ++e) offset[e + 1] = offset[e] + s.ws.triangles.size(e);
  auto step = [&](const EdgeScores& prev, double beta) {
    EdgeScores out(prev.size());
    for (int e = 0; e < s.g.num_edges(); ++e) {
      const auto en = s.ws.triangles[e];
      if (en.empty()) {
        out[e] = 0.5;
        continue;
      }
      double num = 0, den = 0;
      for (std::size_t n = 0; n < en.size(); ++n) {
        const double w = std::exp(-beta * (prev[en[n].edge_ik] + prev[en[n].edge_jk]));
        num += w * s.aab[offset[e] + n];
        den += w;
      }
      out[e] = num / den;
    }
    return out;
  };
  const auto s1 = step(hist[0], 3.0);
  const auto s2 = step(s1, 4.5);
  for (int e = 0; e < s.g.num_edges(); ++e) {
    EXPECT_NEAR(hist[1][e], s1[e], 1e-14);
    EXPECT_NEAR(hist[2][e], s2[e], 1e-14);
  }
}

TEST(Taab, ConfigValidation) {
  TaabConfig cfg;
  cfg.growth = 1.0;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = {};
  cfg.beta0 = 0.0;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = {};
  cfg.iterations = 0;
  EXPECT_THROW(cfg.validate(), Error);
}

TEST(TaabProperty, ConvexCombinationBounds) {
  const auto r = props::taab_convex_bounds(1000, 3);
  EXPECT_EQ(r.failures, 0) << r.first_failure;
}

TEST(TaabProperty, MonotoneDominance) {
  const auto r = props::taab_monotone_dominance(1000, 4);
  EXPECT_EQ(r.failures, 0) << r.first_failure;
}

TEST(TaabProperty, Determinism) {
  const auto r = props::taab_determinism(1000, 5);
  EXPECT_EQ(r.failures, 0) << r.first_failure;
}

TEST(Separation, PlantedInstanceSatisfiesBothBounds) {
  const Planted p = planted::separation_instance();
  const auto rep = check_instance(p.g, p.dirs, kDefaultWellShapedAngle, 10);
  ASSERT_TRUE(rep.instance.hypotheses_hold) << rep.instance.reason;
  EXPECT_EQ(rep.instance.lambda, 0.0);
  EXPECT_GT(rep.instance.mu, 0.0);
  EXPECT_EQ(rep.outcome, "passed");
  EXPECT_EQ(rep.bounds.violations, 0);
  EXPECT_GE(rep.bounds.good_margin, 0.0);
  EXPECT_GE(rep.bounds.bad_margin, 0.0);
}

TEST(Separation, PlantedBoundsCheckedAgainstHistory) {
  // Recompute both bounds from the raw history, independent of the checker.
  const Planted p = planted::separation_instance();
  const auto ws = well_shaped_filter(p.g, p.g.triangles(), p.dirs);
  const auto aab = aab_table(p.g, ws, p.dirs);
  const auto inst = measure_theorem_instance(p.g, ws, aab, p.dirs);
  ASSERT_TRUE(inst.hypotheses_hold);
  TaabConfig cfg;
  const auto hist = taab_history(p.g, ws, aab, cfg);
  const int bad = p.g.edge_id(0, 1);
  // The reversed edge is at angle pi from the truth.
  const double s_star = 1.0;
  for (std::size_t t = 0; t < hist.size(); ++t) {
    const double good_bound = 1.0 / (2.0 * cfg.beta0 * std::pow(cfg.growth, double(t)));
    for (int e = 0; e < p.g.num_edges(); ++e) {
      if (e == bad) {
        EXPECT_GE(hist[t][e], inst.mu / std::numbers::e * (1.0 - inst.lambda) * s_star);
      } else {
        EXPECT_LE(hist[t][e], good_bound);
      }
    }
  }
}

TEST(Separation, BrokenInstanceIsReportedNotAsserted) {
  // Corrupting the four ring edges puts bad edges into most triangles of
  // the clean spokes, which breaks the lambda hypothesis.
  Planted p = planted::separation_instance();
  for (auto [a, b] : {std::pair{2, 3}, std::pair{3, 4}, std::pair{4, 5}, std::pair{2, 5}}) {
    const int e = p.g.edge_id(a, b);
    p.dirs.gamma[e] = -p.dirs.gamma[e];
    (*p.dirs.corrupt)[e] = 1;
  }
  const auto rep = check_instance(p.g, p.dirs, kDefaultWellShapedAngle, 10);
  EXPECT_EQ(rep.outcome, "hypotheses unmet");
  EXPECT_FALSE(rep.accepted());
  EXPECT_FALSE(rep.rejections.empty());
}

TEST(Separation, CleanInstanceHoldsTrivially) {
  Planted p = planted::separation_instance();
  const int e = p.g.edge_id(0, 1);
  p.dirs.gamma[e] = (*p.dirs.truth)[e];
  (*p.dirs.corrupt)[e] = 0;
  const auto rep = check_instance(p.g, p.dirs, kDefaultWellShapedAngle, 10);
  ASSERT_TRUE(rep.accepted()) << rep.rejections.front();
  EXPECT_EQ(rep.outcome, "passed");
  EXPECT_EQ(rep.instance.lambda, 0.0);
  EXPECT_GE(rep.bounds.good_margin, 0.0);
}

TEST(Separation, GaussianCleanDataLeavesShortEdgesUncovered) {
  // Two nearby cameras are seen at a near-zero angle from everywhere else,
  // so lambda is undefined on that edge and the instance is not checked.
  const auto rep = theorem_check(kDefaultWellShapedAngle, 25, 1.0, 0.0, 3, 2, 10);
  EXPECT_EQ(rep.outcome, "hypotheses unmet");
  ASSERT_EQ(rep.rejections.size(), 2u);
  EXPECT_EQ(rep.rejections[0], "edge without well-shaped triangles");
}

TEST(Separation, AdmissibleScheduleRespectsLimits) {
  TheoremInstance inst;
  inst.lambda = 0.01;
  inst.beta0_max = 1.0 / (2 * inst.lambda);
  inst.r_max = 1.1;
  double beta0 = 0, growth = 0;
  ASSERT_TRUE(admissible_schedule(inst, TaabConfig{}, beta0, growth));
  EXPECT_EQ(beta0, 5.0);
  EXPECT_NEAR(growth, 1.05, 1e-15);
  inst.r_max = 0.9;
  EXPECT_FALSE(admissible_schedule(inst, TaabConfig{}, beta0, growth));
}
