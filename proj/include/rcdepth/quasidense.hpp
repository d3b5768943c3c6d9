#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "rcdepth/geometry.hpp"
#include "rcdepth/map_ops.hpp"
#include "rcdepth/types.hpp"

namespace rcdepth {

// Confidence clamp for the cross-entropy loss.
inline constexpr double kEpsProb = 1e-7;
// Association gate: pixels whose interpolated depth is within this of the
// radar depth count as positive labels.
inline constexpr double kLabelGateMeters = 0.5;

// Window in image coordinates; x0/y0 top-left, w x h extent.
struct PatchWindow {
  int x0 = 0, y0 = 0;
  int w = 0, h = 0;

  bool operator==(const PatchWindow&) const = default;
};

// Per-radar-point association confidence over a rectangular image patch.
struct ConfidencePatch {
  int point_index = -1;
  PatchWindow window;
  std::vector<double> conf;  // window.w * window.h, row-major, [0, 1]

  double at(int py, int px) const {
    return conf[static_cast<size_t>(py) * window.w + px];
  }
};

// All patches of one frame plus the cloud they refer to.
struct ConfidenceStack {
  int width = 0, height = 0;
  std::vector<ConfidencePatch> patches;
  PointCloud cloud;
};

// Patch window centered on the projected pixel; shifted (not shrunk) when it
// would overrun the image, so the patch size is preserved.
inline PatchWindow make_patch_window(const Vec3& p, const CameraIntrinsics& K,
                                     int patch_w, int patch_h) {
  if (patch_w > K.width || patch_h > K.height)
    throw Error(ErrorCode::PatchTooLarge,
                std::to_string(patch_w) + "x" + std::to_string(patch_h) +
                    " patch in " + std::to_string(K.width) + "x" +
                    std::to_string(K.height) + " image");
  int u, v;
  if (!project_pixel(p, K, &u, &v))
    throw Error(ErrorCode::OutOfView, "point projects outside the image");
  int x0 = std::clamp(u - patch_w / 2, 0, K.width - patch_w);
  int y0 = std::clamp(v - patch_h / 2, 0, K.height - patch_h);
  return PatchWindow{x0, y0, patch_w, patch_h};
}

// Binary association labels from the densified depth: 1 where the depth
// difference to the radar point is under the gate and the pixel is valid.
// Serves both as training labels and as an upper-bound confidence provider.
inline ConfidencePatch oracle_confidence(const Vec3& p, int point_index,
                                         const PatchWindow& win,
                                         const FloatMap& d_int) {
  if (win.x0 < 0 || win.y0 < 0 || win.x0 + win.w > d_int.width ||
      win.y0 + win.h > d_int.height)
    throw Error(ErrorCode::ShapeMismatch, "patch window outside map bounds");
  ConfidencePatch patch;
  patch.point_index = point_index;
  patch.window = win;
  patch.conf.assign(static_cast<size_t>(win.w) * win.h, 0.0);
  for (int py = 0; py < win.h; ++py) {
    for (int px = 0; px < win.w; ++px) {
      int y = win.y0 + py, x = win.x0 + px;
      if (!d_int.is_valid(y, x)) continue;
      if (std::abs(d_int.at(y, x) - p.z) < kLabelGateMeters)
        patch.conf[static_cast<size_t>(py) * win.w + px] = 1.0;
    }
  }
  return patch;
}

// Quasi-dense depth: per pixel, the depth of the radar point with the
// highest covering confidence, kept only when that confidence exceeds tau.
// Ties break toward the lowest point index, so the reduction is
// order-independent.
inline FloatMap assemble_quasi_dense(const ConfidenceStack& stack,
                                     double tau) {
  FloatMap out(MapKind::Depth, stack.width, stack.height);
  std::vector<double> best_conf(out.size(), -1.0);
  std::vector<int> best_index(out.size(), -1);

  for (const ConfidencePatch& patch : stack.patches) {
    const PatchWindow& w = patch.window;
    double depth = stack.cloud.points[patch.point_index].z;
    for (int py = 0; py < w.h; ++py) {
      size_t row = out.idx(w.y0 + py, w.x0);
      for (int px = 0; px < w.w; ++px) {
        size_t i = row + px;
        double cf = patch.conf[static_cast<size_t>(py) * w.w + px];
        if (cf > best_conf[i] ||
            (cf == best_conf[i] && patch.point_index < best_index[i])) {
          best_conf[i] = cf;
          best_index[i] = patch.point_index;
          out.values[i] = depth;
        }
      }
    }
  }
  for (size_t i = 0; i < out.size(); ++i) {
    if (best_index[i] >= 0 && best_conf[i] > tau) {
      out.valid[i] = 1;
    } else {
      out.values[i] = 0.0;
    }
  }
  return out;
}

struct ScaleMaps {
  FloatMap s_q;             // d_q / d_ga where both valid
  FloatMap inv_s_q_filled;  // 1 / s_q, dense, ones (flagged) elsewhere
};

inline ScaleMaps compute_scale_map(const FloatMap& d_q, const FloatMap& d_ga) {
  require_same_shape(d_q, d_ga, "compute_scale_map");
  ScaleMaps out;
  out.s_q = FloatMap(MapKind::Scale, d_q.width, d_q.height);
  out.inv_s_q_filled = FloatMap::constant(MapKind::Scale, d_q.width,
                                          d_q.height, 1.0);
  out.inv_s_q_filled.flags.assign(out.inv_s_q_filled.size(), 1);
  for (size_t i = 0; i < d_q.size(); ++i) {
    if (!d_q.valid[i] || !d_ga.valid[i]) continue;
    double s = d_q.values[i] / d_ga.values[i];
    out.s_q.values[i] = s;
    out.s_q.valid[i] = 1;
    out.inv_s_q_filled.values[i] = 1.0 / s;
    out.inv_s_q_filled.flags[i] = 0;
  }
  return out;
}

// Mean binary cross-entropy over a patch, prediction clamped away from the
// log singularities.
inline double bce_loss(const ConfidencePatch& pred,
                       const ConfidencePatch& label) {
  if (!(pred.window == label.window))
    throw Error(ErrorCode::ShapeMismatch, "bce_loss: patch windows differ");
  size_t n = pred.conf.size();
  KahanSum s;
  for (size_t i = 0; i < n; ++i) {
    double y = label.conf[i];
    double yh = std::clamp(pred.conf[i], kEpsProb, 1.0 - kEpsProb);
    s.add(-(y * std::log(yh) + (1.0 - y) * std::log(1.0 - yh)));
  }
  return s.value() / static_cast<double>(n);
}

}  // namespace rcdepth
