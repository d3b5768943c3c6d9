#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "rcdepth/types.hpp"

namespace rcdepth {

// Pinhole projection of a camera-frame point; returns false when the point
// is behind the camera or lands out of bounds.
inline bool project_pixel(const Vec3& p, const CameraIntrinsics& K, int* u,
                          int* v) {
  if (!(p.z > kEpsDepth)) return false;
  double uf = K.fx * p.x / p.z + K.cx;
  double vf = K.fy * p.y / p.z + K.cy;
  long ui = std::lround(uf);
  long vi = std::lround(vf);
  if (ui < 0 || ui >= K.width || vi < 0 || vi >= K.height) return false;
  *u = static_cast<int>(ui);
  *v = static_cast<int>(vi);
  return true;
}

// Sparse depth map from a point cloud; nearest depth wins per pixel.
inline FloatMap project_points(const PointCloud& cloud,
                               const CameraIntrinsics& K) {
  FloatMap out(MapKind::Depth, K.width, K.height);
  for (const Vec3& p : cloud.points) {
    int u, v;
    if (!project_pixel(p, K, &u, &v)) continue;
    size_t i = out.idx(v, u);
    if (!out.valid[i] || p.z < out.values[i]) {
      out.values[i] = p.z;
      out.valid[i] = 1;
    }
  }
  return out;
}

inline PointCloud transform_cloud(const PointCloud& cloud, const Pose& T) {
  PointCloud out;
  out.points.reserve(cloud.points.size());
  for (const Vec3& p : cloud.points) out.points.push_back(T.apply(p));
  out.attributes = cloud.attributes;
  return out;
}

// A point cloud with the pose mapping it into the reference frame.
struct PosedCloud {
  PointCloud cloud;
  Pose pose;
};

inline FloatMap accumulate_lidar(const std::vector<PosedCloud>& frames,
                                 const CameraIntrinsics& K) {
  if (frames.empty())
    throw Error(ErrorCode::EmptyInput, "accumulate_lidar: no frames");
  PointCloud merged;
  size_t total = 0;
  for (const PosedCloud& f : frames) total += f.cloud.size();
  merged.points.reserve(total);
  for (const PosedCloud& f : frames) {
    for (const Vec3& p : f.cloud.points) merged.points.push_back(f.pose.apply(p));
  }
  return project_points(merged, K);
}

}  // namespace rcdepth
