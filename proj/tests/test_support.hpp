#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "rcdepth/refine.hpp"
#include "rcdepth/rng.hpp"
#include "rcdepth/types.hpp"

namespace rcdepth::testing {

inline FloatMap depth_map(int w, int h, double value) {
  return FloatMap::constant(MapKind::Depth, w, h, value);
}

inline FloatMap map_from(MapKind kind, int w, int h,
                         const std::vector<double>& values) {
  FloatMap m(kind, w, h);
  m.values = values;
  std::fill(m.valid.begin(), m.valid.end(), uint8_t{1});
  return m;
}

inline FloatMap random_depth_map(int w, int h, uint64_t seed, double lo = 1.0,
                                 double hi = 60.0, double invalid_frac = 0.0) {
  StreamRng rng(seed, 0x7465737455ULL);
  FloatMap m(MapKind::Depth, w, h);
  for (size_t i = 0; i < m.size(); ++i) {
    if (invalid_frac > 0.0 && rng.uniform() < invalid_frac) continue;
    m.values[i] = rng.uniform(lo, hi);
    m.valid[i] = 1;
  }
  return m;
}

inline bool maps_identical(const FloatMap& a, const FloatMap& b) {
  return a.width == b.width && a.height == b.height &&
         a.values == b.values && a.valid == b.valid;
}

// Unique scratch directory under the system temp dir; removed on
// destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    path_ = std::filesystem::temp_directory_path() /
            ("rcdepth_" + tag + "_" + std::to_string(stamp));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline std::vector<char> read_file_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::vector<char>(std::istreambuf_iterator<char>(in),
                           std::istreambuf_iterator<char>());
}

// ---------------------------------------------------------------------------
// Gradient-check instances. Central differences are only a valid oracle at a
// point of differentiability, so the parameters are drawn with unit-scale
// biases and small kernels (every pre-activation sits far from the rectifier
// kink) and the instance is rejected if any residual lands near the
// smoothed-L1 branch point or the composition clamp. Kink subgradients are
// covered by dedicated exact tests.

struct GradInstance {
  RefinerParams params;
  RefineFrame frame;
};

inline GradInstance make_grad_instance(uint64_t seed, int w, int h) {
  GradInstance inst;
  StreamRng rng(seed, 0x6F);
  inst.frame.z_ga = FloatMap(MapKind::InverseDepth, w, h);
  for (size_t i = 0; i < inst.frame.z_ga.size(); ++i) {
    inst.frame.z_ga.values[i] = rng.uniform(0.05, 0.5);
    inst.frame.z_ga.valid[i] = 1;
  }
  inst.frame.inv_s_q = FloatMap::constant(MapKind::Scale, w, h, 1.0);
  for (double& v : inst.frame.inv_s_q.values) v = rng.uniform(0.8, 1.2);
  inst.frame.d_gt = FloatMap(MapKind::Depth, w, h);
  inst.frame.d_int = FloatMap(MapKind::Depth, w, h);
  for (size_t i = 0; i < inst.frame.d_gt.size(); ++i) {
    double base = 1.0 / inst.frame.z_ga.values[i];
    if (rng.uniform() < 0.6) {
      inst.frame.d_gt.values[i] = base * rng.uniform(0.85, 1.15);
      inst.frame.d_gt.valid[i] = 1;
    }
    inst.frame.d_int.values[i] = base * rng.uniform(0.85, 1.15);
    inst.frame.d_int.valid[i] = 1;
  }
  StreamRng prng(seed ^ 0x5EED, 0x70);
  auto fill = [&](std::vector<double>& v, double s) {
    for (double& x : v) x = s * prng.gaussian();
  };
  fill(inst.params.w1, 0.01);
  fill(inst.params.w2, 0.004);
  fill(inst.params.w3, 0.01);
  for (double& b : inst.params.b1)
    b = (prng.uniform() < 0.5 ? -1.0 : 1.0) * prng.uniform(0.5, 1.0);
  for (double& b : inst.params.b2)
    b = (prng.uniform() < 0.5 ? -1.0 : 1.0) * prng.uniform(0.5, 1.0);
  inst.params.b3[0] = 0.3;
  return inst;
}

inline bool grad_instance_is_smooth(const GradInstance& inst) {
  detail::ForwardTrace t =
      detail::refiner_trace(inst.params, inst.frame.z_ga, inst.frame.inv_s_q);
  for (double v : t.pre1)
    if (std::abs(v) < 1e-3) return false;
  for (double v : t.pre2)
    if (std::abs(v) < 1e-3) return false;
  FloatMap r(MapKind::Residual, t.w, t.h);
  r.values = t.residual;
  std::fill(r.valid.begin(), r.valid.end(), uint8_t{1});
  for (double v : r.values)
    if (std::abs((1.0 + v) - kEpsScale) < 1e-3) return false;
  ComposeResult comp = compose(inst.frame.z_ga, r);
  for (size_t i = 0; i < comp.d_hat.size(); ++i) {
    if (inst.frame.d_gt.valid[i] &&
        std::abs(std::abs(comp.d_hat.values[i] - inst.frame.d_gt.values[i]) -
                 1.0) < 1e-3)
      return false;
    if (inst.frame.d_int.valid[i] &&
        std::abs(std::abs(comp.d_hat.values[i] - inst.frame.d_int.values[i]) -
                 1.0) < 1e-3)
      return false;
  }
  return true;
}

inline GradInstance next_smooth_grad_instance(uint64_t& seed, int w, int h) {
  for (;;) {
    GradInstance inst = make_grad_instance(seed++, w, h);
    if (grad_instance_is_smooth(inst)) return inst;
  }
}

}  // namespace rcdepth::testing
