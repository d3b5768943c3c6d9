#pragma once

#include <cmath>
#include <vector>

#include "rcdepth/map_ops.hpp"
#include "rcdepth/types.hpp"

namespace rcdepth {

// Depth error metrics over one range cap. Depth metrics in millimeters,
// inverse-depth metrics in 1/km.
struct MetricsReport {
  double range_cap_m = 0.0;
  size_t n_pixels = 0;
  double mae_mm = 0.0;
  double rmse_mm = 0.0;
  double imae_per_km = 0.0;
  double irmse_per_km = 0.0;
  double absrel = 0.0;
  double sqrel_mm = 0.0;
  double delta1 = 0.0;
};

inline constexpr double kDelta1Threshold = 1.25;

namespace detail {

struct MetricAccum {
  size_t n = 0;
  KahanSum abs_err, sq_err, abs_inv, sq_inv, absrel, sqrel;
  size_t delta1_hits = 0;

  void add(double d_hat, double d_gt) {
    double diff = d_hat - d_gt;
    double inv_diff = 1.0 / d_hat - 1.0 / d_gt;
    abs_err.add(std::abs(diff));
    sq_err.add(diff * diff);
    abs_inv.add(std::abs(inv_diff));
    sq_inv.add(inv_diff * inv_diff);
    absrel.add(std::abs(diff) / d_gt);
    sqrel.add(diff * diff / d_gt);
    double ratio = std::max(d_hat / d_gt, d_gt / d_hat);
    if (ratio < kDelta1Threshold) ++delta1_hits;
    ++n;
  }

  MetricsReport report(double cap) const {
    MetricsReport r;
    r.range_cap_m = cap;
    r.n_pixels = n;
    double inv_n = 1.0 / static_cast<double>(n);
    r.mae_mm = abs_err.value() * inv_n * 1000.0;
    r.rmse_mm = std::sqrt(sq_err.value() * inv_n) * 1000.0;
    r.imae_per_km = abs_inv.value() * inv_n * 1000.0;
    r.irmse_per_km = std::sqrt(sq_inv.value() * inv_n) * 1000.0;
    r.absrel = absrel.value() * inv_n;
    r.sqrel_mm = sqrel.value() * inv_n * 1000.0;
    r.delta1 = static_cast<double>(delta1_hits) * inv_n;
    return r;
  }
};

}  // namespace detail

// Evaluate d_hat against d_gt over pixels valid in both with
// 0 < d_gt <= range_cap.
inline MetricsReport evaluate(const FloatMap& d_hat, const FloatMap& d_gt,
                              double range_cap_m) {
  require_same_shape(d_hat, d_gt, "evaluate");
  detail::MetricAccum acc;
  for (size_t i = 0; i < d_gt.size(); ++i) {
    if (!d_gt.valid[i] || !d_hat.valid[i]) continue;
    double gt = d_gt.values[i];
    if (!(gt > 0.0) || gt > range_cap_m) continue;
    acc.add(d_hat.values[i], gt);
  }
  if (acc.n == 0)
    throw Error(ErrorCode::EmptyDomain,
                "no valid pixel within the range cap");
  return acc.report(range_cap_m);
}

// Single pass over the pixels, one accumulator per cap; equals per-cap
// evaluate() calls bit-exactly because each accumulator sees the same pixel
// sequence.
inline std::vector<MetricsReport> evaluate_ranges(
    const FloatMap& d_hat, const FloatMap& d_gt,
    const std::vector<double>& caps) {
  require_same_shape(d_hat, d_gt, "evaluate_ranges");
  if (caps.empty())
    throw Error(ErrorCode::EmptyInput, "evaluate_ranges: no caps");
  std::vector<detail::MetricAccum> accs(caps.size());
  for (size_t i = 0; i < d_gt.size(); ++i) {
    if (!d_gt.valid[i] || !d_hat.valid[i]) continue;
    double gt = d_gt.values[i];
    if (!(gt > 0.0)) continue;
    for (size_t k = 0; k < caps.size(); ++k) {
      if (gt <= caps[k]) accs[k].add(d_hat.values[i], gt);
    }
  }
  std::vector<MetricsReport> out;
  out.reserve(caps.size());
  for (size_t k = 0; k < caps.size(); ++k) {
    if (accs[k].n == 0)
      throw Error(ErrorCode::EmptyDomain,
                  "no valid pixel within cap " + std::to_string(caps[k]));
    out.push_back(accs[k].report(caps[k]));
  }
  return out;
}

}  // namespace rcdepth
