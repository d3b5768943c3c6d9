#include <gtest/gtest.h>

#include <cmath>

#include "rcdepth/align.hpp"
#include "rcdepth/rng.hpp"
#include "test_support.hpp"

namespace rcdepth {
namespace {

using testing::map_from;

Correspondences affine_pairs(const std::vector<double>& z_m, double a,
                             double b) {
  Correspondences c;
  c.pred = z_m;
  for (double z : z_m) c.radar_depth.push_back(1.0 / (a * z + b));
  return c;
}

double sse(const Correspondences& c, double scale, double offset) {
  double s = 0.0;
  for (size_t i = 0; i < c.size(); ++i) {
    double r = scale * c.pred[i] + offset - 1.0 / c.radar_depth[i];
    s += r * r;
  }
  return s;
}

TEST(BuildCorrespondences, CountsJointlyValidPixels) {
  FloatMap pred = map_from(MapKind::InverseDepth, 4, 1, {0.1, 0.2, 0.3, 0.4});
  FloatMap radar(MapKind::Depth, 4, 1);
  radar.set(0, 0, 5.0);
  radar.set(0, 2, 8.0);
  radar.set(0, 3, 9.0);
  EXPECT_EQ(build_correspondences(pred, radar).size(), 3u);

  pred.unset(0, 3);  // radar pixel invalid in the prediction is excluded
  EXPECT_EQ(build_correspondences(pred, radar).size(), 2u);
}

TEST(BuildCorrespondences, DisjointValidityThrows) {
  FloatMap pred(MapKind::InverseDepth, 2, 1);
  pred.set(0, 0, 0.5);
  FloatMap radar(MapKind::Depth, 2, 1);
  radar.set(0, 1, 4.0);
  try {
    build_correspondences(pred, radar);
    FAIL() << "expected EmptyOverlap";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyOverlap);
  }
}

TEST(FitLs, ExactAffineRecovery) {
  Correspondences c = affine_pairs({0.1, 0.2, 0.3}, 2.0, 0.05);
  AlignmentParams p = fit_ls(c);
  EXPECT_NEAR(p.scale, 2.0, 1e-12);
  EXPECT_NEAR(p.offset, 0.05, 1e-12);
  EXPECT_EQ(p.space, AlignSpace::InverseDepthSpace);
}

TEST(FitLs, RankDeficiencyThrows) {
  Correspondences c = affine_pairs({0.1, 0.1, 0.1}, 2.0, 0.05);
  try {
    fit_ls(c);
    FAIL() << "expected SingularSystem";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SingularSystem);
  }
  Correspondences one = affine_pairs({0.1}, 2.0, 0.05);
  EXPECT_THROW(fit_ls(one), Error);
}

TEST(FitLs, NoisyFitMatchesGridRefinementOracle) {
  StreamRng rng(5, 0);
  Correspondences c;
  const double a = 1.7, b = 0.02, sigma = 1e-3;
  for (int i = 0; i < 200; ++i) {
    double z = rng.uniform(0.05, 0.5);
    c.pred.push_back(z);
    c.radar_depth.push_back(1.0 / (a * z + b + sigma * rng.gaussian()));
  }
  AlignmentParams p = fit_ls(c);

  // brute-force 2-D grid refinement around a generous box
  double lo_s = a * 0.5, hi_s = a * 1.5, lo_t = -0.1, hi_t = 0.1;
  double best_s = 0.0, best_t = 0.0;
  for (int level = 0; level < 8; ++level) {
    double best = 1e300;
    for (int i = 0; i <= 40; ++i) {
      for (int j = 0; j <= 40; ++j) {
        double s = lo_s + (hi_s - lo_s) * i / 40.0;
        double t = lo_t + (hi_t - lo_t) * j / 40.0;
        double e = sse(c, s, t);
        if (e < best) {
          best = e;
          best_s = s;
          best_t = t;
        }
      }
    }
    double span_s = (hi_s - lo_s) / 40.0, span_t = (hi_t - lo_t) / 40.0;
    lo_s = best_s - 2.0 * span_s;
    hi_s = best_s + 2.0 * span_s;
    lo_t = best_t - 2.0 * span_t;
    hi_t = best_t + 2.0 * span_t;
  }
  // oracle and closed form agree within the final grid spacing, and the
  // closed form is never worse
  EXPECT_NEAR(p.scale, best_s, 3.0 * sigma);
  EXPECT_NEAR(p.offset, best_t, 3.0 * sigma);
  EXPECT_LE(sse(c, p.scale, p.offset), sse(c, best_s, best_t) + 1e-15);
}

TEST(FitLs, RecoveryPropertyOverRandomAffineRelations) {
  StreamRng rng(31, 9);
  for (int trial = 0; trial < 50; ++trial) {
    double a = rng.uniform(0.2, 5.0);
    double b = rng.uniform(-0.05, 0.2);
    Correspondences c;
    for (int i = 0; i < 20; ++i) c.pred.push_back(rng.uniform(0.02, 1.0));
    for (double z : c.pred) c.radar_depth.push_back(1.0 / (a * z + b));
    AlignmentParams p = fit_ls(c);
    EXPECT_NEAR(p.scale, a, 1e-9 * a);
    EXPECT_NEAR(p.offset, b, 1e-9 * std::max(1.0, std::abs(b)));
  }
}

TEST(FitVar, SinglePairExactSolve) {
  Correspondences c;
  c.pred = {0.5};
  c.radar_depth = {4.0};
  AlignmentParams p = fit_var(c);
  EXPECT_NEAR(p.scale, 0.5, 1e-9);
  EXPECT_DOUBLE_EQ(p.offset, 0.0);
}

TEST(FitVar, ConsistentPairsRecoverScale) {
  Correspondences c;
  for (double z : {0.05, 0.1, 0.2, 0.4}) {
    c.pred.push_back(z);
    c.radar_depth.push_back(1.0 / (2.0 * z));
  }
  EXPECT_NEAR(fit_var(c).scale, 2.0, 2.0 * 1e-6);
}

TEST(FitVar, MatchesDenseGridSearchOracle) {
  StreamRng rng(77, 1);
  Correspondences c;
  for (int i = 0; i < 50; ++i) {
    double z = rng.uniform(0.02, 0.8);
    c.pred.push_back(z);
    c.radar_depth.push_back(
        std::max(0.2, 1.0 / (1.4 * z) + 0.3 * rng.gaussian()));
  }
  AlignmentParams p = fit_var(c);

  auto energy = [&](double s) {
    double e = 0.0;
    for (size_t i = 0; i < c.size(); ++i) {
      double r = 1.0 / (s * c.pred[i]) - c.radar_depth[i];
      e += r * r;
    }
    return e;
  };
  // dense 1-D log-spaced scan
  const int n = 100000;
  double best_s = 0.0, best_e = 1e300;
  double lg_lo = std::log(0.1), lg_hi = std::log(10.0);
  for (int i = 0; i <= n; ++i) {
    double s = std::exp(lg_lo + (lg_hi - lg_lo) * i / n);
    double e = energy(s);
    if (e < best_e) {
      best_e = e;
      best_s = s;
    }
  }
  double grid_step = best_s * (std::exp((lg_hi - lg_lo) / n) - 1.0);
  EXPECT_NEAR(p.scale, best_s, grid_step);
  // residual optimality at +-0.1% of the solution
  EXPECT_LE(energy(p.scale), energy(p.scale * 1.001));
  EXPECT_LE(energy(p.scale), energy(p.scale * 0.999));
}

TEST(FitVar, NoBracketWhenRootBelowRange) {
  Correspondences c;
  c.pred = {1.0};
  c.radar_depth = {1e9};  // scale would have to be 1e-9
  try {
    fit_var(c);
    FAIL() << "expected NoBracket";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NoBracket);
  }
}

TEST(FitRansac, OutlierFreeIsExactAndMatchesLs) {
  StreamRng rng(15, 3);
  Correspondences c;
  for (int i = 0; i < 60; ++i) c.pred.push_back(rng.uniform(0.02, 0.9));
  for (double z : c.pred) c.radar_depth.push_back(1.0 / (1.9 * z + 0.01));
  AlignmentParams r = fit_ransac(c, 123);
  AlignmentParams l = fit_ls(c);
  EXPECT_NEAR(r.scale, l.scale, 1e-9);
  EXPECT_NEAR(r.offset, l.offset, 1e-9);
}

TEST(FitRansac, RejectsGrossOutliersWithInlierRefit) {
  // The disjunctive 6 m / 0.015 gate lets mildly contaminated fits keep
  // every clean inlier, tying the exact hypothesis's ratio, so recovering
  // the clean fit requires the refit-on-inliers option.
  StreamRng rng(99, 8);
  Correspondences clean, mixed;
  for (int i = 0; i < 100; ++i) {
    double d = rng.uniform(8.0, 25.0);
    double z = 2.0 / d + 0.05;
    bool outlier = i % 10 < 3;  // 30%
    clean.pred.push_back(z);
    clean.radar_depth.push_back(d);
    mixed.pred.push_back(z);
    mixed.radar_depth.push_back(outlier ? d * 10.0 : d);
  }
  Correspondences clean_only;
  for (int i = 0; i < 100; ++i) {
    if (i % 10 >= 3) {
      clean_only.pred.push_back(mixed.pred[i]);
      clean_only.radar_depth.push_back(mixed.radar_depth[i]);
    }
  }
  AlignmentParams want = fit_ls(clean_only);
  RansacOptions opt;
  opt.refit_on_inliers = true;
  AlignmentParams got = fit_ransac(mixed, 7, opt);
  EXPECT_NEAR(got.scale, want.scale, 1e-6);
  EXPECT_NEAR(got.offset, want.offset, 1e-6);

  AlignmentParams naive = fit_ls(mixed);
  EXPECT_GT(std::abs(naive.scale - want.scale), 1e-5);
}

TEST(FitRansac, DeterministicGivenSeed) {
  StreamRng rng(4, 4);
  Correspondences c;
  for (int i = 0; i < 40; ++i) {
    double z = rng.uniform(0.05, 0.5);
    c.pred.push_back(z);
    c.radar_depth.push_back(1.0 / (1.2 * z + 0.02) +
                            0.2 * rng.gaussian());
  }
  for (double& d : c.radar_depth) d = std::max(d, 0.3);
  AlignmentParams a = fit_ransac(c, 42);
  AlignmentParams b = fit_ransac(c, 42);
  EXPECT_EQ(a.scale, b.scale);
  EXPECT_EQ(a.offset, b.offset);
}

TEST(FitRansac, InsufficientDataThrows) {
  Correspondences c = affine_pairs({0.1, 0.2, 0.3, 0.4}, 1.0, 0.0);
  try {
    fit_ransac(c, 0);
    FAIL() << "expected InsufficientData";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InsufficientData);
  }
}

TEST(EstimateConst, MeanAndSingleton) {
  EXPECT_DOUBLE_EQ(estimate_const({1.0, 3.0}).scale, 2.0);
  EXPECT_DOUBLE_EQ(estimate_const({5.0}).scale, 5.0);
  EXPECT_THROW(estimate_const({}), Error);
}

TEST(EstimateConst, MatchesStreamingMeanOracle) {
  StreamRng rng(6, 6);
  std::vector<double> scales;
  for (int i = 0; i < 1000; ++i) scales.push_back(rng.uniform(0.5, 3.0));
  double mean = 0.0;
  for (size_t i = 0; i < scales.size(); ++i)
    mean += (scales[i] - mean) / static_cast<double>(i + 1);
  EXPECT_NEAR(estimate_const(scales).scale, mean, 1e-12);
}

TEST(ApplyAlignment, IdentityKeepsInputAndInverse) {
  FloatMap z = map_from(MapKind::InverseDepth, 3, 1, {0.1, 0.25, 0.5});
  AlignedMaps out = apply_alignment(
      z, AlignmentParams::make(1.0, 0.0, AlignSpace::InverseDepthSpace));
  for (int x = 0; x < 3; ++x) {
    EXPECT_DOUBLE_EQ(out.z_ga.at(0, x), z.at(0, x));
    EXPECT_DOUBLE_EQ(out.d_ga.at(0, x), 1.0 / z.at(0, x));
  }
}

TEST(ApplyAlignment, DirectFormulaEvaluation) {
  FloatMap z = map_from(MapKind::InverseDepth, 1, 1, {0.2});
  AlignedMaps out = apply_alignment(
      z, AlignmentParams::make(2.0, 0.1, AlignSpace::InverseDepthSpace));
  EXPECT_DOUBLE_EQ(out.z_ga.at(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(out.d_ga.at(0, 0), 2.0);
}

TEST(ApplyAlignment, NegativeAlignedValueInvalidates) {
  FloatMap z = map_from(MapKind::InverseDepth, 2, 1, {0.2, 0.001});
  AlignedMaps out = apply_alignment(
      z, AlignmentParams::make(1.0, -0.05, AlignSpace::InverseDepthSpace));
  EXPECT_TRUE(out.d_ga.is_valid(0, 0));
  EXPECT_FALSE(out.d_ga.is_valid(0, 1));
  for (size_t i = 0; i < out.d_ga.size(); ++i) {
    if (out.d_ga.valid[i]) EXPECT_GT(out.d_ga.values[i], 0.0);
  }
}

TEST(ApplyAlignment, KindMismatchThrows) {
  FloatMap d = map_from(MapKind::Depth, 1, 1, {5.0});
  EXPECT_THROW(
      apply_alignment(d, AlignmentParams::make(
                             1.0, 0.0, AlignSpace::InverseDepthSpace)),
      Error);
}

TEST(ApplyAlignment, DepthSpaceVariant) {
  FloatMap d = map_from(MapKind::Depth, 1, 1, {5.0});
  AlignedMaps out = apply_alignment(
      d, AlignmentParams::make(2.0, 1.0, AlignSpace::DepthSpace));
  EXPECT_DOUBLE_EQ(out.d_ga.at(0, 0), 11.0);
  EXPECT_DOUBLE_EQ(out.z_ga.at(0, 0), 1.0 / 11.0);
}

TEST(ApplyAlignment, ReparameterizationInvariance) {
  // scaling all predictions by alpha rescales the fit but not the output
  StreamRng rng(13, 5);
  Correspondences c;
  FloatMap pred(MapKind::InverseDepth, 10, 5);
  for (size_t i = 0; i < pred.size(); ++i) {
    pred.values[i] = rng.uniform(0.05, 0.6);
    pred.valid[i] = 1;
  }
  for (int i = 0; i < 30; ++i) {
    double z = pred.values[i];
    c.pred.push_back(z);
    c.radar_depth.push_back(1.0 / (1.5 * z + 0.02 + 1e-4 * rng.gaussian()));
  }
  const double alpha = 3.7;
  Correspondences c2 = c;
  FloatMap pred2 = pred;
  for (double& z : c2.pred) z *= alpha;
  for (double& z : pred2.values) z *= alpha;

  AlignmentParams p1 = fit_ls(c);
  AlignmentParams p2 = fit_ls(c2);
  EXPECT_NEAR(p2.scale, p1.scale / alpha, 1e-9 * p1.scale);
  EXPECT_NEAR(p2.offset, p1.offset, 1e-9 * std::max(1.0, std::abs(p1.offset)));

  AlignedMaps o1 = apply_alignment(pred, p1);
  AlignedMaps o2 = apply_alignment(pred2, p2);
  for (size_t i = 0; i < o1.d_ga.size(); ++i) {
    ASSERT_EQ(o1.d_ga.valid[i], o2.d_ga.valid[i]);
    if (o1.d_ga.valid[i])
      EXPECT_NEAR(o2.d_ga.values[i], o1.d_ga.values[i],
                  1e-9 * o1.d_ga.values[i]);
  }
}

}  // namespace
}  // namespace rcdepth
