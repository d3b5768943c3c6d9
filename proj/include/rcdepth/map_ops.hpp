#pragma once

#include <algorithm>
#include <cmath>

#include "rcdepth/types.hpp"

namespace rcdepth {

// Neumaier compensated accumulator; keeps reductions order-stable to ~1e-16.
struct KahanSum {
  double sum = 0.0;
  double comp = 0.0;

  void add(double v) {
    double t = sum + v;
    if (std::abs(sum) >= std::abs(v))
      comp += (sum - t) + v;
    else
      comp += (v - t) + sum;
    sum = t;
  }
  double value() const { return sum + comp; }
};

inline double valid_sum(const FloatMap& m) {
  KahanSum s;
  size_t n = 0;
  for (size_t i = 0; i < m.size(); ++i) {
    if (m.valid[i]) {
      s.add(m.values[i]);
      ++n;
    }
  }
  if (n == 0) throw Error(ErrorCode::EmptyDomain, "sum over zero valid pixels");
  return s.value();
}

inline double valid_mean(const FloatMap& m) {
  KahanSum s;
  size_t n = 0;
  for (size_t i = 0; i < m.size(); ++i) {
    if (m.valid[i]) {
      s.add(m.values[i]);
      ++n;
    }
  }
  if (n == 0)
    throw Error(ErrorCode::EmptyDomain, "mean over zero valid pixels");
  return s.value() / static_cast<double>(n);
}

// Reciprocal map: Depth <-> InverseDepth. Valid pixels at or below kEpsDepth
// become invalid instead of producing huge reciprocals.
inline FloatMap invert_map(const FloatMap& m) {
  MapKind out_kind;
  if (m.kind == MapKind::Depth)
    out_kind = MapKind::InverseDepth;
  else if (m.kind == MapKind::InverseDepth)
    out_kind = MapKind::Depth;
  else
    throw Error(ErrorCode::KindMismatch,
                std::string("invert_map on ") + map_kind_name(m.kind));

  FloatMap out(out_kind, m.width, m.height);
  for (size_t i = 0; i < m.size(); ++i) {
    if (m.valid[i] && m.values[i] > kEpsDepth) {
      out.values[i] = 1.0 / m.values[i];
      out.valid[i] = 1;
    }
  }
  return out;
}

inline FloatMap apply_mask(const FloatMap& m, const std::vector<uint8_t>& mask,
                           int mask_width, int mask_height) {
  if (mask_width != m.width || mask_height != m.height ||
      mask.size() != m.size())
    throw Error(ErrorCode::ShapeMismatch, "apply_mask: mask shape differs");
  FloatMap out = m;
  for (size_t i = 0; i < m.size(); ++i) {
    if (!mask[i]) {
      out.valid[i] = 0;
      out.values[i] = 0.0;
    }
  }
  return out;
}

// Bilinear resampling with endpoint-aligned coordinates. An output pixel is
// valid only if every source pixel with nonzero weight is valid.
inline FloatMap resize_bilinear(const FloatMap& m, int w, int h) {
  if (w < 2 || h < 2)
    throw Error(ErrorCode::InvalidParams, "resize_bilinear: target below 2x2");
  if (m.width < 1 || m.height < 1)
    throw Error(ErrorCode::EmptyInput, "resize_bilinear: empty source");

  FloatMap out(m.kind, w, h);
  const double sx_step =
      (w == 1) ? 0.0 : static_cast<double>(m.width - 1) / (w - 1);
  const double sy_step =
      (h == 1) ? 0.0 : static_cast<double>(m.height - 1) / (h - 1);

  for (int y = 0; y < h; ++y) {
    double sy = y * sy_step;
    int y0 = static_cast<int>(sy);
    if (y0 > m.height - 1) y0 = m.height - 1;
    double fy = sy - y0;
    int y1 = (fy > 0.0) ? y0 + 1 : y0;
    for (int x = 0; x < w; ++x) {
      double sx = x * sx_step;
      int x0 = static_cast<int>(sx);
      if (x0 > m.width - 1) x0 = m.width - 1;
      double fx = sx - x0;
      int x1 = (fx > 0.0) ? x0 + 1 : x0;

      bool ok = m.is_valid(y0, x0);
      if (x1 != x0) ok = ok && m.is_valid(y0, x1);
      if (y1 != y0) ok = ok && m.is_valid(y1, x0);
      if (x1 != x0 && y1 != y0) ok = ok && m.is_valid(y1, x1);
      if (!ok) continue;

      double v = (1.0 - fy) * ((1.0 - fx) * m.at(y0, x0));
      if (x1 != x0) v += (1.0 - fy) * (fx * m.at(y0, x1));
      if (y1 != y0) {
        v += fy * ((1.0 - fx) * m.at(y1, x0));
        if (x1 != x0) v += fy * (fx * m.at(y1, x1));
      }
      out.set(y, x, v);
    }
  }
  return out;
}

}  // namespace rcdepth
