#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "rcdepth/map_ops.hpp"
#include "rcdepth/rng.hpp"
#include "rcdepth/types.hpp"

namespace rcdepth {

enum class AlignSpace : uint8_t {
  DepthSpace,
  InverseDepthSpace,
};

// Global scale and offset mapping a scaleless prediction onto metric depth.
struct AlignmentParams {
  double scale = 1.0;
  double offset = 0.0;
  AlignSpace space = AlignSpace::InverseDepthSpace;

  static AlignmentParams make(double scale, double offset, AlignSpace space) {
    if (!std::isfinite(scale) || !(scale > 0.0) || !std::isfinite(offset))
      throw Error(ErrorCode::InvalidParams,
                  "alignment scale must be finite and positive");
    return AlignmentParams{scale, offset, space};
  }
};

// Prediction value and metric radar depth sampled at the same pixel.
struct Correspondences {
  std::vector<double> pred;
  std::vector<double> radar_depth;

  size_t size() const { return pred.size(); }
};

inline Correspondences build_correspondences(const FloatMap& pred,
                                             const FloatMap& radar) {
  require_same_shape(pred, radar, "build_correspondences");
  if (radar.kind != MapKind::Depth)
    throw Error(ErrorCode::KindMismatch,
                "build_correspondences: radar map must hold depth");
  Correspondences c;
  for (size_t i = 0; i < pred.size(); ++i) {
    if (pred.valid[i] && radar.valid[i]) {
      c.pred.push_back(pred.values[i]);
      c.radar_depth.push_back(radar.values[i]);
    }
  }
  if (c.pred.empty())
    throw Error(ErrorCode::EmptyOverlap,
                "no pixel valid in both prediction and radar depth");
  return c;
}

namespace detail {

// Alignment target in the fitting space: inverse radar depth or radar depth.
inline double fit_target(double radar_depth, AlignSpace space) {
  return space == AlignSpace::InverseDepthSpace ? 1.0 / radar_depth
                                                : radar_depth;
}

struct AffineFit {
  double scale = 0.0;
  double offset = 0.0;
};

// Closed-form least squares of target ~ scale * pred + offset, centered for
// numerical stability.
inline AffineFit fit_ls_raw(const Correspondences& c, AlignSpace space) {
  size_t n = c.size();
  if (n < 2)
    throw Error(ErrorCode::InsufficientData, "fit_ls needs >=2 pairs");
  double pmin = c.pred[0], pmax = c.pred[0];
  KahanSum sp, st;
  for (size_t i = 0; i < n; ++i) {
    pmin = std::min(pmin, c.pred[i]);
    pmax = std::max(pmax, c.pred[i]);
    sp.add(c.pred[i]);
    st.add(fit_target(c.radar_depth[i], space));
  }
  if (pmin == pmax)
    throw Error(ErrorCode::SingularSystem,
                "all prediction values identical; offset inseparable");
  double pm = sp.value() / static_cast<double>(n);
  double tm = st.value() / static_cast<double>(n);
  KahanSum spp, spt;
  for (size_t i = 0; i < n; ++i) {
    double dp = c.pred[i] - pm;
    double dt = fit_target(c.radar_depth[i], space) - tm;
    spp.add(dp * dp);
    spt.add(dp * dt);
  }
  if (!(spp.value() > 0.0))
    throw Error(ErrorCode::SingularSystem, "zero variance in predictions");
  double scale = spt.value() / spp.value();
  double offset = tm - scale * pm;
  return AffineFit{scale, offset};
}

// Sum of squared depth residuals of the scale-only model.
inline double var_objective(const Correspondences& c, AlignSpace space,
                            double s) {
  KahanSum e;
  for (size_t i = 0; i < c.size(); ++i) {
    double aligned = space == AlignSpace::InverseDepthSpace
                         ? 1.0 / (s * c.pred[i])
                         : s * c.pred[i];
    double r = aligned - c.radar_depth[i];
    e.add(r * r);
  }
  return e.value();
}

inline double var_derivative(const Correspondences& c, AlignSpace space,
                             double s) {
  KahanSum g;
  for (size_t i = 0; i < c.size(); ++i) {
    if (space == AlignSpace::InverseDepthSpace) {
      double inv = 1.0 / (s * c.pred[i]);
      g.add(2.0 * (inv - c.radar_depth[i]) * (-inv / s));
    } else {
      g.add(2.0 * (s * c.pred[i] - c.radar_depth[i]) * c.pred[i]);
    }
  }
  return g.value();
}

}  // namespace detail

inline AlignmentParams fit_ls(const Correspondences& c,
                              AlignSpace space = AlignSpace::InverseDepthSpace) {
  detail::AffineFit f = detail::fit_ls_raw(c, space);
  return AlignmentParams::make(f.scale, f.offset, space);
}

inline constexpr double kVarBracketLo = 1e-6;
inline constexpr double kVarBracketHi = 1e6;
inline constexpr double kVarTolRel = 1e-10;

// Scale-only alignment: Brent root-finding on dE/ds where E is the squared
// depth-residual of the scale-only model.
inline AlignmentParams fit_var(const Correspondences& c,
                               AlignSpace space = AlignSpace::InverseDepthSpace) {
  if (c.size() < 1)
    throw Error(ErrorCode::InsufficientData, "fit_var needs >=1 pair");

  auto g = [&](double s) { return detail::var_derivative(c, space, s); };

  double lo = 0.5, hi = 2.0;
  double glo = g(lo), ghi = g(hi);
  while (glo * ghi > 0.0 && (lo > kVarBracketLo || hi < kVarBracketHi)) {
    lo = std::max(lo * 0.25, kVarBracketLo);
    hi = std::min(hi * 4.0, kVarBracketHi);
    glo = g(lo);
    ghi = g(hi);
  }
  if (glo == 0.0) return AlignmentParams::make(lo, 0.0, space);
  if (ghi == 0.0) return AlignmentParams::make(hi, 0.0, space);
  if (glo * ghi > 0.0)
    throw Error(ErrorCode::NoBracket,
                "derivative has no sign change in [1e-6, 1e6]");

  // Brent: inverse quadratic / secant with bisection fallback.
  double a = lo, b = hi, fa = glo, fb = ghi;
  double cc = a, fc = fa, d = b - a, e = b - a;
  for (int iter = 0; iter < 200; ++iter) {
    if (std::abs(fc) < std::abs(fb)) {
      a = b;
      b = cc;
      cc = a;
      fa = fb;
      fb = fc;
      fc = fa;
    }
    double tol = 2.0 * kVarTolRel * std::abs(b) + 1e-300;
    double xm = 0.5 * (cc - b);
    if (std::abs(xm) <= tol || fb == 0.0) break;
    if (std::abs(e) >= tol && std::abs(fa) > std::abs(fb)) {
      double s = fb / fa, p, q;
      if (a == cc) {
        p = 2.0 * xm * s;
        q = 1.0 - s;
      } else {
        double qq = fa / fc, r = fb / fc;
        p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
        q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
      }
      if (p > 0.0) q = -q;
      p = std::abs(p);
      if (2.0 * p < std::min(3.0 * xm * q - std::abs(tol * q),
                             std::abs(e * q))) {
        e = d;
        d = p / q;
      } else {
        d = xm;
        e = d;
      }
    } else {
      d = xm;
      e = d;
    }
    a = b;
    fa = fb;
    b += (std::abs(d) > tol) ? d : (xm > 0.0 ? tol : -tol);
    fb = g(b);
    if ((fb > 0.0) == (fc > 0.0)) {
      cc = a;
      fc = fa;
      e = b - a;
      d = e;
    }
  }
  return AlignmentParams::make(b, 0.0, space);
}

inline AlignmentParams estimate_const(
    const std::vector<double>& per_frame_scales,
    AlignSpace space = AlignSpace::InverseDepthSpace) {
  if (per_frame_scales.empty())
    throw Error(ErrorCode::EmptyInput, "estimate_const: no scales");
  KahanSum s;
  for (double v : per_frame_scales) s.add(v);
  return AlignmentParams::make(
      s.value() / static_cast<double>(per_frame_scales.size()), 0.0, space);
}

struct RansacOptions {
  AlignSpace space = AlignSpace::InverseDepthSpace;
  int max_iters = 400;
  int sample_size = 5;
  double min_inlier_ratio = 0.9;
  double depth_tol_m = 6.0;
  double inv_depth_tol = 0.015;
  bool refit_on_inliers = false;
};

namespace detail {

inline bool ransac_inlier(double pred, double depth, const AffineFit& h,
                          const RansacOptions& opt) {
  double fitted = h.scale * pred + h.offset;
  if (opt.space == AlignSpace::InverseDepthSpace) {
    bool inv_ok = std::abs(fitted - 1.0 / depth) < opt.inv_depth_tol;
    bool depth_ok =
        fitted > kEpsDepth && std::abs(1.0 / fitted - depth) < opt.depth_tol_m;
    return depth_ok || inv_ok;
  }
  bool depth_ok = std::abs(fitted - depth) < opt.depth_tol_m;
  bool inv_ok = fitted > kEpsDepth &&
                std::abs(1.0 / fitted - 1.0 / depth) < opt.inv_depth_tol;
  return depth_ok || inv_ok;
}

}  // namespace detail

// Robust alignment: repeatedly fit on 5 random pairs and adopt the first
// hypothesis whose inlier ratio exceeds 0.9 under the disjunctive
// 6 m / 0.015 discrepancy test; after max_iters, fall back to the highest
// ratio seen.
inline AlignmentParams fit_ransac(const Correspondences& c, uint64_t seed,
                                  const RansacOptions& opt = RansacOptions{}) {
  size_t n = c.size();
  if (static_cast<int>(n) < opt.sample_size)
    throw Error(ErrorCode::InsufficientData,
                "fit_ransac needs >= " + std::to_string(opt.sample_size) +
                    " pairs");

  StreamRng rng(seed, 0x72616E73ULL);  // "rans"
  detail::AffineFit best{};
  double best_ratio = -1.0;
  bool accepted = false;

  for (int iter = 0; iter < opt.max_iters && !accepted; ++iter) {
    int idx[16];
    for (int k = 0; k < opt.sample_size; ++k) {
      bool fresh = false;
      while (!fresh) {
        idx[k] = static_cast<int>(rng.bounded(n));
        fresh = true;
        for (int j = 0; j < k; ++j)
          if (idx[j] == idx[k]) fresh = false;
      }
    }
    Correspondences sub;
    for (int k = 0; k < opt.sample_size; ++k) {
      sub.pred.push_back(c.pred[idx[k]]);
      sub.radar_depth.push_back(c.radar_depth[idx[k]]);
    }
    detail::AffineFit h;
    try {
      h = detail::fit_ls_raw(sub, opt.space);
    } catch (const Error&) {
      continue;  // degenerate sample
    }
    // hypotheses outside the representable parameter domain cannot be
    // returned, so they cannot be adopted either
    if (!(h.scale > 0.0) || !std::isfinite(h.scale) ||
        !std::isfinite(h.offset))
      continue;
    size_t inliers = 0;
    for (size_t i = 0; i < n; ++i)
      inliers += detail::ransac_inlier(c.pred[i], c.radar_depth[i], h, opt);
    double ratio = static_cast<double>(inliers) / static_cast<double>(n);
    if (ratio > best_ratio) {
      best_ratio = ratio;
      best = h;
    }
    if (ratio > opt.min_inlier_ratio) accepted = true;
  }

  if (best_ratio < 0.0)
    throw Error(ErrorCode::SingularSystem,
                "every RANSAC sample was degenerate");

  if (opt.refit_on_inliers) {
    Correspondences in;
    for (size_t i = 0; i < n; ++i) {
      if (detail::ransac_inlier(c.pred[i], c.radar_depth[i], best, opt)) {
        in.pred.push_back(c.pred[i]);
        in.radar_depth.push_back(c.radar_depth[i]);
      }
    }
    if (in.size() >= 2) best = detail::fit_ls_raw(in, opt.space);
  }
  return AlignmentParams::make(best.scale, best.offset, opt.space);
}

struct AlignedMaps {
  FloatMap d_ga;  // globally aligned depth
  FloatMap z_ga;  // its inverse
};

// Apply global alignment in the parameter space and return both the aligned
// depth and aligned inverse depth. Pixels whose aligned value (or its
// reciprocal) falls at or below kEpsDepth become invalid.
inline AlignedMaps apply_alignment(const FloatMap& pred,
                                   const AlignmentParams& p) {
  bool inverse = p.space == AlignSpace::InverseDepthSpace;
  if (inverse && pred.kind != MapKind::InverseDepth)
    throw Error(ErrorCode::KindMismatch,
                "inverse-space alignment expects an inverse-depth prediction");
  if (!inverse && pred.kind != MapKind::Depth)
    throw Error(ErrorCode::KindMismatch,
                "depth-space alignment expects a depth prediction");

  AlignedMaps out;
  out.d_ga = FloatMap(MapKind::Depth, pred.width, pred.height);
  out.z_ga = FloatMap(MapKind::InverseDepth, pred.width, pred.height);
  const double hi = 1.0 / kEpsDepth;
  for (size_t i = 0; i < pred.size(); ++i) {
    if (!pred.valid[i]) continue;
    double fitted = p.scale * pred.values[i] + p.offset;
    if (!(fitted > kEpsDepth) || !(fitted < hi)) continue;
    double z = inverse ? fitted : 1.0 / fitted;
    double d = inverse ? 1.0 / fitted : fitted;
    out.d_ga.values[i] = d;
    out.d_ga.valid[i] = 1;
    out.z_ga.values[i] = z;
    out.z_ga.valid[i] = 1;
  }
  return out;
}

}  // namespace rcdepth
