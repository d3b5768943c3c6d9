#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "rcdepth/delaunay.hpp"
#include "rcdepth/types.hpp"

namespace rcdepth {

// Densify a sparse depth map: Delaunay-triangulate the valid pixel centers,
// interpolate log-depth barycentrically inside each triangle, exponentiate.
// Pixels outside the convex hull stay invalid; valid input pixels reproduce
// their depth exactly.
inline FloatMap interpolate_log(const FloatMap& sparse) {
  if (sparse.kind != MapKind::Depth)
    throw Error(ErrorCode::KindMismatch, "interpolate_log expects a depth map");

  std::vector<Point2> pts;
  std::vector<double> log_depth;
  std::vector<size_t> pix;
  for (int y = 0; y < sparse.height; ++y) {
    for (int x = 0; x < sparse.width; ++x) {
      if (!sparse.is_valid(y, x)) continue;
      pts.push_back(Point2{static_cast<double>(x), static_cast<double>(y)});
      log_depth.push_back(std::log(sparse.at(y, x)));
      pix.push_back(sparse.idx(y, x));
    }
  }
  if (pts.size() < 3)
    throw Error(ErrorCode::DegenerateSupport,
                "interpolate_log needs >=3 valid pixels");

  std::vector<Triangle> tris = delaunay_triangulate(pts);

  FloatMap out(MapKind::Depth, sparse.width, sparse.height);
  for (const Triangle& t : tris) {
    const Point2& A = pts[t.a];
    const Point2& B = pts[t.b];
    const Point2& C = pts[t.c];
    double area2 = detail::orient2d(A, B, C);
    if (area2 <= 0.0) continue;

    int x_lo = static_cast<int>(std::ceil(std::min({A.x, B.x, C.x})));
    int x_hi = static_cast<int>(std::floor(std::max({A.x, B.x, C.x})));
    int y_lo = static_cast<int>(std::ceil(std::min({A.y, B.y, C.y})));
    int y_hi = static_cast<int>(std::floor(std::max({A.y, B.y, C.y})));
    x_lo = std::max(x_lo, 0);
    y_lo = std::max(y_lo, 0);
    x_hi = std::min(x_hi, sparse.width - 1);
    y_hi = std::min(y_hi, sparse.height - 1);

    for (int y = y_lo; y <= y_hi; ++y) {
      for (int x = x_lo; x <= x_hi; ++x) {
        Point2 P{static_cast<double>(x), static_cast<double>(y)};
        double wa = detail::orient2d(B, C, P);
        double wb = detail::orient2d(C, A, P);
        double wc = detail::orient2d(A, B, P);
        if (wa < 0.0 || wb < 0.0 || wc < 0.0) continue;
        double wsum = wa + wb + wc;
        double lv = (wa * log_depth[t.a] + wb * log_depth[t.b] +
                     wc * log_depth[t.c]) /
                    wsum;
        out.values[out.idx(y, x)] = std::exp(lv);
        out.valid[out.idx(y, x)] = 1;
      }
    }
  }

  // Vertex pixels reproduce the input bit-exactly.
  for (size_t i = 0; i < pix.size(); ++i) {
    out.values[pix[i]] = sparse.values[pix[i]];
    out.valid[pix[i]] = 1;
  }
  return out;
}

}  // namespace rcdepth
