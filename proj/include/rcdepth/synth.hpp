#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "rcdepth/rng.hpp"
#include "rcdepth/types.hpp"

namespace rcdepth {

// Fronto-parallel rectangle at constant camera depth.
struct WallSpec {
  double z = 10.0;
  double x0 = -1.0, x1 = 1.0;
  double y0 = -1.0, y1 = 1.0;
};

struct SceneSpec {
  int width = 320;
  int height = 240;
  double fx = 300.0, fy = 300.0;
  double cx = 159.5, cy = 119.5;
  int frames = 1;
  uint64_t seed = 0;

  bool has_ground = false;
  double ground_height_m = 1.5;  // camera y points down; plane y = height
  std::vector<WallSpec> walls;
  int random_walls = 0;  // extra per-frame seeded walls
  double max_depth_m = 80.0;

  int radar_points = 0;
  double radar_sigma_m = 0.0;
  double radar_jitter_px = 0.0;
  double radar_outlier_frac = 0.0;
  double radar_max_range_m = 80.0;
  double radar_row_bias = 1.0;  // 0 = uniform rows

  int lidar_stride = 4;

  double mono_a = 1.0;
  double mono_b = 0.0;
  double mono_gamma = 0.0;

  CameraIntrinsics intrinsics() const {
    return CameraIntrinsics{fx, fy, cx, cy, width, height};
  }
};

namespace detail {
inline constexpr uint64_t kStreamWalls = 1;
inline constexpr uint64_t kStreamRadar = 2;
inline constexpr uint64_t kStreamMono = 3;
inline constexpr uint64_t kFrameTag = 0xF00DULL;
}  // namespace detail

// Resolve the per-frame scene: reseed and append this frame's random walls.
inline SceneSpec scene_for_frame(const SceneSpec& spec, int frame) {
  SceneSpec out = spec;
  out.frames = 1;
  out.seed = StreamRng::derive_key(spec.seed, detail::kFrameTag + frame);
  out.random_walls = 0;
  StreamRng rng(out.seed, detail::kStreamWalls);
  for (int i = 0; i < spec.random_walls; ++i) {
    WallSpec w;
    w.z = rng.uniform(4.0, 60.0);
    double cu = rng.uniform(0.0, spec.width - 1.0);
    double cv = rng.uniform(0.0, spec.height - 1.0);
    double cx_m = w.z * (cu - spec.cx) / spec.fx;
    double cy_m = w.z * (cv - spec.cy) / spec.fy;
    double half_w = rng.uniform(0.1, 0.45) * w.z * spec.width / (2.0 * spec.fx);
    double half_h =
        rng.uniform(0.1, 0.45) * w.z * spec.height / (2.0 * spec.fy);
    w.x0 = cx_m - half_w;
    w.x1 = cx_m + half_w;
    w.y0 = cy_m - half_h;
    w.y1 = cy_m + half_h;
    out.walls.push_back(w);
  }
  return out;
}

// Per-pixel nearest-surface depth by ray casting.
inline FloatMap render_gt(const SceneSpec& spec) {
  if (spec.walls.empty() && !spec.has_ground)
    throw Error(ErrorCode::EmptyScene, "scene has no surfaces");
  FloatMap out(MapKind::Depth, spec.width, spec.height);
  for (int y = 0; y < spec.height; ++y) {
    double dy = (y - spec.cy) / spec.fy;
    for (int x = 0; x < spec.width; ++x) {
      double dx = (x - spec.cx) / spec.fx;
      double depth = spec.max_depth_m + 1.0;
      bool hit = false;
      for (const WallSpec& w : spec.walls) {
        if (!(w.z > 0.0) || w.z > spec.max_depth_m || w.z >= depth) continue;
        double px = w.z * dx, py = w.z * dy;
        if (px >= w.x0 && px <= w.x1 && py >= w.y0 && py <= w.y1) {
          depth = w.z;
          hit = true;
        }
      }
      if (spec.has_ground && dy > 1e-12) {
        double zg = spec.ground_height_m / dy;
        if (zg > 0.0 && zg <= spec.max_depth_m && zg < depth) {
          depth = zg;
          hit = true;
        }
      }
      if (hit) out.set(y, x, depth);
    }
  }
  return out;
}

// Simulated radar: row-biased pixel draws back-projected at noisy depth,
// with pixel jitter and a fraction of uniform gross outliers.
inline PointCloud sample_radar(const SceneSpec& spec, const FloatMap& gt) {
  PointCloud cloud;
  if (spec.radar_points <= 0) return cloud;
  StreamRng rng(spec.seed, detail::kStreamRadar);
  const double row_exp = 1.0 / (1.0 + std::max(0.0, spec.radar_row_bias));
  for (int i = 0; i < spec.radar_points; ++i) {
    int u = -1, v = -1;
    bool found = false;
    for (int attempt = 0; attempt < 1000 && !found; ++attempt) {
      u = static_cast<int>(rng.bounded(static_cast<uint64_t>(gt.width)));
      double t = std::pow(rng.uniform(), row_exp);
      v = std::min(gt.height - 1, static_cast<int>(t * gt.height));
      found = gt.is_valid(v, u);
    }
    if (!found) continue;

    double noise = rng.gaussian();
    double outlier_depth = rng.uniform(1.0, spec.radar_max_range_m);
    bool outlier = rng.uniform() < spec.radar_outlier_frac;
    double ju = rng.gaussian(), jv = rng.gaussian();

    double depth = outlier ? outlier_depth
                           : gt.at(v, u) + spec.radar_sigma_m * noise;
    depth = std::max(depth, 0.05);
    double uj = std::clamp(u + spec.radar_jitter_px * ju, 0.0, gt.width - 1.0);
    double vj = std::clamp(v + spec.radar_jitter_px * jv, 0.0, gt.height - 1.0);
    cloud.points.push_back(Vec3{depth * (uj - spec.cx) / spec.fx,
                                depth * (vj - spec.cy) / spec.fy, depth});
  }
  return cloud;
}

// Noiseless regular-grid rays at exact surface depth.
inline PointCloud sample_lidar(const SceneSpec& spec, const FloatMap& gt) {
  PointCloud cloud;
  int stride = std::max(1, spec.lidar_stride);
  for (int y = 0; y < gt.height; y += stride) {
    for (int x = 0; x < gt.width; x += stride) {
      if (!gt.is_valid(y, x)) continue;
      double d = gt.at(y, x);
      cloud.points.push_back(
          Vec3{d * (x - spec.cx) / spec.fx, d * (y - spec.cy) / spec.fy, d});
    }
  }
  return cloud;
}

namespace detail {

// Sum of four seeded low-frequency sinusoids, normalized on the grid to zero
// mean and unit max-abs.
inline std::vector<double> smooth_field(const SceneSpec& spec) {
  StreamRng rng(spec.seed, kStreamMono);
  double fu[4], fv[4], ph[4];
  for (int k = 0; k < 4; ++k) {
    fu[k] = rng.uniform(0.5, 2.5);
    fv[k] = rng.uniform(0.5, 2.5);
    ph[k] = rng.uniform(0.0, 6.283185307179586);
  }
  std::vector<double> f(static_cast<size_t>(spec.width) * spec.height, 0.0);
  for (int y = 0; y < spec.height; ++y) {
    for (int x = 0; x < spec.width; ++x) {
      double acc = 0.0;
      for (int k = 0; k < 4; ++k) {
        acc += std::sin(6.283185307179586 *
                            (fu[k] * x / spec.width + fv[k] * y / spec.height) +
                        ph[k]);
      }
      f[static_cast<size_t>(y) * spec.width + x] = acc;
    }
  }
  double mean = 0.0;
  for (double v : f) mean += v;
  mean /= static_cast<double>(f.size());
  double max_abs = 0.0;
  for (double& v : f) {
    v -= mean;
    max_abs = std::max(max_abs, std::abs(v));
  }
  if (max_abs > 0.0)
    for (double& v : f) v /= max_abs;
  return f;
}

}  // namespace detail

// Scaleless "monocular" inverse depth: affine in true inverse depth, with an
// optional smooth multiplicative local error field.
inline FloatMap distort_mono(const SceneSpec& spec, const FloatMap& gt) {
  if (!(spec.mono_a > 0.0))
    throw Error(ErrorCode::InvalidDistortion,
                "mono distortion gain must be positive");
  FloatMap out(MapKind::InverseDepth, gt.width, gt.height);
  std::vector<double> field;
  if (spec.mono_gamma != 0.0) field = detail::smooth_field(spec);
  for (size_t i = 0; i < gt.size(); ++i) {
    if (!gt.valid[i]) continue;
    double z = spec.mono_a * (1.0 / gt.values[i]) + spec.mono_b;
    if (!field.empty()) z *= std::exp(spec.mono_gamma * field[i]);
    out.values[i] = std::max(z, kEpsDepth);
    out.valid[i] = 1;
  }
  return out;
}

}  // namespace rcdepth
