#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace rcdepth {

// Depths below this are treated as degenerate and invalidated on inversion
// or alignment.
inline constexpr double kEpsDepth = 1e-6;

enum class ErrorCode {
  KindMismatch,
  ShapeMismatch,
  EmptyDomain,
  EmptyInput,
  EmptyOverlap,
  InsufficientData,
  SingularSystem,
  NoBracket,
  DegenerateSupport,
  OutOfView,
  PatchTooLarge,
  EmptyScene,
  InvalidDistortion,
  DivergenceDetected,
  InvalidParams,
  IoError,
  ParseError,
  UsageError,
};

inline const char* error_code_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::KindMismatch: return "KindMismatch";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::EmptyDomain: return "EmptyDomain";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::EmptyOverlap: return "EmptyOverlap";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::NoBracket: return "NoBracket";
    case ErrorCode::DegenerateSupport: return "DegenerateSupport";
    case ErrorCode::OutOfView: return "OutOfView";
    case ErrorCode::PatchTooLarge: return "PatchTooLarge";
    case ErrorCode::EmptyScene: return "EmptyScene";
    case ErrorCode::InvalidDistortion: return "InvalidDistortion";
    case ErrorCode::DivergenceDetected: return "DivergenceDetected";
    case ErrorCode::InvalidParams: return "InvalidParams";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::UsageError: return "UsageError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

enum class MapKind : uint8_t {
  Depth,         // meters, > 0 at valid pixels
  InverseDepth,  // 1/meters, > 0 at valid pixels
  Scale,         // unitless, > 0 at valid pixels
  Confidence,    // [0, 1]
  Residual,      // unitless, any sign
};

inline const char* map_kind_name(MapKind k) {
  switch (k) {
    case MapKind::Depth: return "Depth";
    case MapKind::InverseDepth: return "InverseDepth";
    case MapKind::Scale: return "Scale";
    case MapKind::Confidence: return "Confidence";
    case MapKind::Residual: return "Residual";
  }
  return "Unknown";
}

// H x W grid of reals with a per-pixel validity bit. Invalid pixels carry
// the sentinel 0.0; the bit, not the value, is authoritative. `flags` is
// optional (empty or H*W) and marks pixels whose value was synthesized
// (filled constants, clamped compositions).
struct FloatMap {
  int width = 0;
  int height = 0;
  MapKind kind = MapKind::Depth;
  std::vector<double> values;
  std::vector<uint8_t> valid;
  std::vector<uint8_t> flags;

  FloatMap() = default;
  FloatMap(MapKind k, int w, int h)
      : width(w),
        height(h),
        kind(k),
        values(static_cast<size_t>(w) * h, 0.0),
        valid(static_cast<size_t>(w) * h, 0) {}

  static FloatMap constant(MapKind k, int w, int h, double value) {
    FloatMap m(k, w, h);
    std::fill(m.values.begin(), m.values.end(), value);
    std::fill(m.valid.begin(), m.valid.end(), uint8_t{1});
    return m;
  }

  size_t size() const { return values.size(); }
  size_t idx(int y, int x) const { return static_cast<size_t>(y) * width + x; }

  double at(int y, int x) const { return values[idx(y, x)]; }
  double& at(int y, int x) { return values[idx(y, x)]; }
  bool is_valid(int y, int x) const { return valid[idx(y, x)] != 0; }

  void set(int y, int x, double v) {
    values[idx(y, x)] = v;
    valid[idx(y, x)] = 1;
  }
  void unset(int y, int x) {
    values[idx(y, x)] = 0.0;
    valid[idx(y, x)] = 0;
  }

  bool same_shape(const FloatMap& o) const {
    return width == o.width && height == o.height;
  }

  size_t valid_count() const {
    size_t n = 0;
    for (uint8_t v : valid) n += (v != 0);
    return n;
  }

  bool is_flagged(int y, int x) const {
    return !flags.empty() && flags[idx(y, x)] != 0;
  }
  void set_flag(int y, int x) {
    if (flags.empty()) flags.assign(size(), 0);
    flags[idx(y, x)] = 1;
  }
};

inline void require_same_shape(const FloatMap& a, const FloatMap& b,
                               const char* where) {
  if (!a.same_shape(b)) {
    throw Error(ErrorCode::ShapeMismatch,
                std::string(where) + ": " + std::to_string(a.width) + "x" +
                    std::to_string(a.height) + " vs " +
                    std::to_string(b.width) + "x" + std::to_string(b.height));
  }
}

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;
};

// Per-point scalar channel, e.g. an intensity attribute.
struct AttrChannel {
  std::string name;
  std::vector<double> values;
};

struct PointCloud {
  std::vector<Vec3> points;
  std::vector<AttrChannel> attributes;

  size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

struct CameraIntrinsics {
  double fx = 0.0, fy = 0.0;
  double cx = 0.0, cy = 0.0;
  int width = 0, height = 0;

  void validate() const {
    if (!(fx > 0.0) || !(fy > 0.0))
      throw Error(ErrorCode::InvalidParams, "focal lengths must be positive");
    if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height))
      throw Error(ErrorCode::InvalidParams,
                  "principal point outside image bounds");
  }
};

// 4x4 rigid transform, row-major. Rotation block must be orthonormal with
// positive determinant.
struct Pose {
  std::array<double, 16> m{1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1};

  static Pose identity() { return Pose{}; }

  static Pose from_matrix(const std::array<double, 16>& mat) {
    Pose p;
    p.m = mat;
    p.validate();
    return p;
  }

  static Pose translation(double tx, double ty, double tz) {
    Pose p;
    p.m[3] = tx;
    p.m[7] = ty;
    p.m[11] = tz;
    return p;
  }

  double r(int i, int j) const { return m[static_cast<size_t>(i) * 4 + j]; }
  double tx() const { return m[3]; }
  double ty() const { return m[7]; }
  double tz() const { return m[11]; }

  Vec3 apply(const Vec3& p) const {
    return Vec3{r(0, 0) * p.x + r(0, 1) * p.y + r(0, 2) * p.z + tx(),
                r(1, 0) * p.x + r(1, 1) * p.y + r(1, 2) * p.z + ty(),
                r(2, 0) * p.x + r(2, 1) * p.y + r(2, 2) * p.z + tz()};
  }

  void validate() const {
    // ||R^T R - I||_F < 1e-6 and det(R) > 0
    double frob2 = 0.0;
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        double dot = 0.0;
        for (int k = 0; k < 3; ++k) dot += r(k, i) * r(k, j);
        double target = (i == j) ? 1.0 : 0.0;
        frob2 += (dot - target) * (dot - target);
      }
    }
    double det = r(0, 0) * (r(1, 1) * r(2, 2) - r(1, 2) * r(2, 1)) -
                 r(0, 1) * (r(1, 0) * r(2, 2) - r(1, 2) * r(2, 0)) +
                 r(0, 2) * (r(1, 0) * r(2, 1) - r(1, 1) * r(2, 0));
    if (std::sqrt(frob2) >= 1e-6 || det <= 0.0)
      throw Error(ErrorCode::InvalidParams, "rotation block not orthonormal");
    if (m[12] != 0.0 || m[13] != 0.0 || m[14] != 0.0 || m[15] != 1.0)
      throw Error(ErrorCode::InvalidParams, "bottom row must be [0 0 0 1]");
  }
};

}  // namespace rcdepth
