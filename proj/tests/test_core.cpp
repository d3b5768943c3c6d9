#include <gtest/gtest.h>

#include "rcdepth/map_ops.hpp"
#include "rcdepth/types.hpp"
#include "test_support.hpp"

namespace rcdepth {
namespace {

using testing::depth_map;
using testing::map_from;
using testing::random_depth_map;

TEST(InvertMap, Reciprocal) {
  FloatMap m = depth_map(2, 1, 2.0);
  FloatMap inv = invert_map(m);
  EXPECT_EQ(inv.kind, MapKind::InverseDepth);
  EXPECT_DOUBLE_EQ(inv.at(0, 0), 0.5);
}

TEST(InvertMap, FixedPointOfOne) {
  FloatMap m = depth_map(1, 1, 1.0);
  EXPECT_DOUBLE_EQ(invert_map(m).at(0, 0), 1.0);
}

TEST(InvertMap, DegenerateDepthInvalidates) {
  FloatMap m = depth_map(1, 1, 1e-12);
  FloatMap inv = invert_map(m);
  EXPECT_FALSE(inv.is_valid(0, 0));
  EXPECT_EQ(inv.at(0, 0), 0.0);  // sentinel
}

TEST(InvertMap, WrongKindThrows) {
  FloatMap m = FloatMap::constant(MapKind::Scale, 1, 1, 2.0);
  try {
    invert_map(m);
    FAIL() << "expected KindMismatch";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::KindMismatch);
  }
}

TEST(InvertMap, InvolutionOnValidPixels) {
  FloatMap m = random_depth_map(17, 13, 42, 0.5, 80.0, 0.2);
  FloatMap round = invert_map(invert_map(m));
  ASSERT_EQ(round.valid, m.valid);
  for (size_t i = 0; i < m.size(); ++i) {
    if (!m.valid[i]) continue;
    EXPECT_NEAR(round.values[i], m.values[i], 1e-12 * m.values[i]);
  }
}

TEST(ApplyMask, AllTrueIsIdentity) {
  FloatMap m = random_depth_map(8, 6, 7);
  std::vector<uint8_t> mask(m.size(), 1);
  EXPECT_TRUE(testing::maps_identical(apply_mask(m, mask, 8, 6), m));
}

TEST(ApplyMask, AllFalseAnnihilates) {
  FloatMap m = random_depth_map(8, 6, 7);
  std::vector<uint8_t> mask(m.size(), 0);
  EXPECT_EQ(apply_mask(m, mask, 8, 6).valid_count(), 0u);
}

TEST(ApplyMask, CheckerboardCount) {
  const int w = 9, h = 7;
  FloatMap m = depth_map(w, h, 5.0);
  std::vector<uint8_t> mask(m.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) mask[y * w + x] = (x + y) % 2 == 0;
  // oracle: count the mask directly
  size_t expected = 0;
  for (uint8_t b : mask) expected += b;
  EXPECT_EQ(expected, static_cast<size_t>((w * h + 1) / 2));
  EXPECT_EQ(apply_mask(m, mask, w, h).valid_count(), expected);
}

TEST(ApplyMask, ShapeMismatchThrows) {
  FloatMap m = depth_map(4, 4, 1.0);
  std::vector<uint8_t> mask(9, 1);
  try {
    apply_mask(m, mask, 3, 3);
    FAIL() << "expected ShapeMismatch";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ShapeMismatch);
  }
}

TEST(Reductions, EmptyDomainIsError) {
  FloatMap m(MapKind::Depth, 3, 3);  // all invalid
  EXPECT_THROW(valid_mean(m), Error);
  EXPECT_THROW(valid_sum(m), Error);
  try {
    valid_mean(m);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyDomain);
  }
}

TEST(Reductions, MeanMatchesNaiveSum) {
  FloatMap m = random_depth_map(20, 20, 3, 1.0, 10.0, 0.3);
  double naive = 0.0;
  size_t n = 0;
  for (size_t i = 0; i < m.size(); ++i) {
    if (m.valid[i]) {
      naive += m.values[i];
      ++n;
    }
  }
  EXPECT_NEAR(valid_mean(m), naive / n, 1e-12);
}

TEST(ResizeBilinear, SameSizeIsBitIdentical) {
  FloatMap m = random_depth_map(11, 9, 5, 1.0, 50.0, 0.25);
  EXPECT_TRUE(testing::maps_identical(resize_bilinear(m, 11, 9), m));
}

TEST(ResizeBilinear, ConstantStaysConstant) {
  FloatMap m = depth_map(4, 4, 7.5);
  FloatMap r = resize_bilinear(m, 9, 5);
  for (size_t i = 0; i < r.size(); ++i) {
    ASSERT_TRUE(r.valid[i]);
    EXPECT_DOUBLE_EQ(r.values[i], 7.5);
  }
}

TEST(ResizeBilinear, HandComputedMidColumn) {
  // [[1,3],[1,3]] widened to 2x3: columns sample x = 0, 0.5, 1
  FloatMap m = map_from(MapKind::Depth, 2, 2, {1.0, 3.0, 1.0, 3.0});
  FloatMap r = resize_bilinear(m, 3, 2);
  for (int y = 0; y < 2; ++y) {
    EXPECT_DOUBLE_EQ(r.at(y, 0), 1.0);
    EXPECT_DOUBLE_EQ(r.at(y, 1), 2.0);
    EXPECT_DOUBLE_EQ(r.at(y, 2), 3.0);
  }
}

TEST(ResizeBilinear, StaysWithinSourceBounds) {
  FloatMap m = random_depth_map(7, 6, 11, 2.0, 40.0);
  double lo = 1e300, hi = -1e300;
  for (size_t i = 0; i < m.size(); ++i) {
    lo = std::min(lo, m.values[i]);
    hi = std::max(hi, m.values[i]);
  }
  FloatMap r = resize_bilinear(m, 23, 17);
  for (size_t i = 0; i < r.size(); ++i) {
    ASSERT_TRUE(r.valid[i]);
    EXPECT_GE(r.values[i], lo - 1e-12);
    EXPECT_LE(r.values[i], hi + 1e-12);
  }
}

TEST(ResizeBilinear, InvalidSourcePixelPropagates) {
  FloatMap m = depth_map(2, 2, 4.0);
  m.unset(0, 1);
  FloatMap r = resize_bilinear(m, 3, 2);
  EXPECT_TRUE(r.is_valid(0, 0));    // only the valid corner contributes
  EXPECT_FALSE(r.is_valid(0, 1));   // depends on the invalid corner
  EXPECT_FALSE(r.is_valid(0, 2));
  EXPECT_TRUE(r.is_valid(1, 0));
  EXPECT_TRUE(r.is_valid(1, 2));
}

TEST(Pose, RejectsNonOrthonormalRotation) {
  std::array<double, 16> bad{1, 0.5, 0, 0, 0, 1, 0, 0,
                             0, 0,   1, 0, 0, 0, 0, 1};
  EXPECT_THROW(Pose::from_matrix(bad), Error);
}

TEST(Intrinsics, Validation) {
  CameraIntrinsics bad{0.0, 100.0, 10.0, 10.0, 64, 48};
  EXPECT_THROW(bad.validate(), Error);
  CameraIntrinsics good{100.0, 100.0, 31.5, 23.5, 64, 48};
  EXPECT_NO_THROW(good.validate());
}

}  // namespace
}  // namespace rcdepth
