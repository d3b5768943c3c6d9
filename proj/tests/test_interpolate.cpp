#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "rcdepth/delaunay.hpp"
#include "rcdepth/interpolate.hpp"
#include "rcdepth/rng.hpp"
#include "test_support.hpp"

namespace rcdepth {
namespace {

// Test-side point-in-triangle check, independent of the rasterizer.
bool inside_triangle(const Point2& a, const Point2& b, const Point2& c,
                     double px, double py) {
  auto side = [&](const Point2& p, const Point2& q) {
    return (q.x - p.x) * (py - p.y) - (q.y - p.y) * (px - p.x);
  };
  double s1 = side(a, b), s2 = side(b, c), s3 = side(c, a);
  bool has_neg = s1 < 0 || s2 < 0 || s3 < 0;
  bool has_pos = s1 > 0 || s2 > 0 || s3 > 0;
  return !(has_neg && has_pos);
}

TEST(Delaunay, RejectsDegenerateInputs) {
  EXPECT_THROW(delaunay_triangulate({{0, 0}, {1, 1}}), Error);
  try {
    delaunay_triangulate({{0, 0}, {1, 1}, {2, 2}, {5, 5}});
    FAIL() << "expected DegenerateSupport";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateSupport);
  }
}

TEST(Delaunay, EmptyCircumcircleProperty) {
  StreamRng rng(81, 4);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Point2> pts;
    for (int i = 0; i < 10; ++i)
      pts.push_back({std::floor(rng.uniform(0.0, 40.0)),
                     std::floor(rng.uniform(0.0, 40.0))});
    // dedupe; duplicates are not meaningful pixel sets
    std::sort(pts.begin(), pts.end(), [](const Point2& a, const Point2& b) {
      return a.x != b.x ? a.x < b.x : a.y < b.y;
    });
    pts.erase(std::unique(pts.begin(), pts.end(),
                          [](const Point2& a, const Point2& b) {
                            return a.x == b.x && a.y == b.y;
                          }),
              pts.end());
    if (pts.size() < 3) continue;
    std::vector<Triangle> tris;
    try {
      tris = delaunay_triangulate(pts);
    } catch (const Error& e) {
      ASSERT_EQ(e.code(), ErrorCode::DegenerateSupport);
      continue;
    }
    std::set<int> used;
    for (const Triangle& t : tris) {
      used.insert(t.a);
      used.insert(t.b);
      used.insert(t.c);
      EXPECT_GT(detail::orient2d(pts[t.a], pts[t.b], pts[t.c]), 0.0);
      for (size_t k = 0; k < pts.size(); ++k) {
        if (static_cast<int>(k) == t.a || static_cast<int>(k) == t.b ||
            static_cast<int>(k) == t.c)
          continue;
        EXPECT_LE(
            detail::incircle(pts[t.a], pts[t.b], pts[t.c], pts[k]), 0.0)
            << "point " << k << " strictly inside a circumcircle";
      }
    }
    EXPECT_EQ(used.size(), pts.size()) << "every point must be a vertex";
  }
}

TEST(InterpolateLog, ConstantTriangleFillsConstant) {
  FloatMap sparse(MapKind::Depth, 16, 16);
  sparse.set(1, 1, 4.0);
  sparse.set(1, 13, 4.0);
  sparse.set(13, 4, 4.0);
  FloatMap dense = interpolate_log(sparse);
  EXPECT_GT(dense.valid_count(), 3u);
  for (size_t i = 0; i < dense.size(); ++i) {
    if (dense.valid[i]) EXPECT_NEAR(dense.values[i], 4.0, 4.0 * 1e-12);
  }
}

TEST(InterpolateLog, EdgeMidpointIsGeometricMean) {
  const double e2 = std::exp(2.0);
  FloatMap sparse(MapKind::Depth, 16, 16);
  sparse.set(0, 0, 1.0);
  sparse.set(0, 10, e2);
  sparse.set(12, 5, 3.0);
  FloatMap dense = interpolate_log(sparse);
  ASSERT_TRUE(dense.is_valid(0, 5));
  EXPECT_NEAR(dense.at(0, 5), std::exp(1.0), 1e-9);
}

TEST(InterpolateLog, VerticesReproduceInputExactly) {
  FloatMap sparse(MapKind::Depth, 32, 32);
  StreamRng rng(7, 2);
  for (int i = 0; i < 20; ++i) {
    int x = static_cast<int>(rng.bounded(32));
    int y = static_cast<int>(rng.bounded(32));
    sparse.set(y, x, rng.uniform(1.0, 50.0));
  }
  FloatMap dense = interpolate_log(sparse);
  for (size_t i = 0; i < sparse.size(); ++i) {
    if (!sparse.valid[i]) continue;
    ASSERT_TRUE(dense.valid[i]);
    EXPECT_EQ(dense.values[i], sparse.values[i]);
  }
}

TEST(InterpolateLog, BoundedByContainingTriangleVertices) {
  FloatMap sparse(MapKind::Depth, 32, 32);
  StreamRng rng(19, 2);
  for (int i = 0; i < 20; ++i) {
    int x = static_cast<int>(rng.bounded(32));
    int y = static_cast<int>(rng.bounded(32));
    sparse.set(y, x, rng.uniform(1.0, 50.0));
  }
  std::vector<Point2> pts;
  std::vector<double> depth;
  for (int y = 0; y < 32; ++y) {
    for (int x = 0; x < 32; ++x) {
      if (sparse.is_valid(y, x)) {
        pts.push_back({static_cast<double>(x), static_cast<double>(y)});
        depth.push_back(sparse.at(y, x));
      }
    }
  }
  std::vector<Triangle> tris = delaunay_triangulate(pts);
  FloatMap dense = interpolate_log(sparse);

  for (int y = 0; y < 32; ++y) {
    for (int x = 0; x < 32; ++x) {
      if (!dense.is_valid(y, x)) continue;
      // brute-force search for containing triangles
      bool contained = false, in_bounds = false;
      for (const Triangle& t : tris) {
        if (!inside_triangle(pts[t.a], pts[t.b], pts[t.c], x, y)) continue;
        contained = true;
        double lo = std::min({depth[t.a], depth[t.b], depth[t.c]});
        double hi = std::max({depth[t.a], depth[t.b], depth[t.c]});
        if (dense.at(y, x) >= lo - 1e-9 * hi &&
            dense.at(y, x) <= hi + 1e-9 * hi)
          in_bounds = true;
      }
      EXPECT_TRUE(contained) << "valid pixel outside every triangle";
      EXPECT_TRUE(in_bounds) << "value outside its supporting triangle at ("
                             << x << "," << y << ")";
    }
  }
  // pixels outside the hull stay invalid: corners of this scatter
  for (const Triangle& t : tris) {
    (void)t;
  }
}

TEST(InterpolateLog, GridCoverageAndDegenerateErrors) {
  FloatMap sparse(MapKind::Depth, 20, 12);
  for (int y = 0; y < 12; y += 3)
    for (int x = 0; x < 20; x += 4) sparse.set(y, x, 6.0);
  FloatMap dense = interpolate_log(sparse);
  // hull is the full lattice rectangle; every pixel inside it must be valid
  for (int y = 0; y <= 9; ++y)
    for (int x = 0; x <= 16; ++x) {
      ASSERT_TRUE(dense.is_valid(y, x)) << x << "," << y;
      EXPECT_NEAR(dense.at(y, x), 6.0, 6.0 * 1e-12);
    }
  // outside the hull: bottom rows beyond the last lattice line
  for (int y = 10; y < 12; ++y)
    for (int x = 0; x < 20; ++x) EXPECT_FALSE(dense.is_valid(y, x));

  FloatMap two(MapKind::Depth, 8, 8);
  two.set(0, 0, 1.0);
  two.set(3, 3, 2.0);
  EXPECT_THROW(interpolate_log(two), Error);

  FloatMap collinear(MapKind::Depth, 8, 8);
  collinear.set(1, 1, 1.0);
  collinear.set(1, 3, 2.0);
  collinear.set(1, 6, 3.0);
  try {
    interpolate_log(collinear);
    FAIL() << "expected DegenerateSupport";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateSupport);
  }
}

}  // namespace
}  // namespace rcdepth
