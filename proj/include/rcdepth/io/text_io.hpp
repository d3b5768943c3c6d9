#pragma once

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "rcdepth/io/image_io.hpp"
#include "rcdepth/metrics.hpp"
#include "rcdepth/refine.hpp"
#include "rcdepth/types.hpp"

namespace rcdepth {

namespace detail {

// 9 significant digits round-trip a 32-bit float exactly; cloud files are
// 32-bit payloads like the PFM maps.
inline std::string format_f32(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(
                                              static_cast<float>(v)));
  return buf;
}

inline std::string format_f64(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  parts.push_back(cur);
  return parts;
}

}  // namespace detail

// Headered CSV: x,y,z plus one column per attribute channel, meters, 9
// significant digits (32-bit payload).
inline void write_cloud_csv(const std::filesystem::path& path,
                            const PointCloud& cloud) {
  std::ofstream out(path);
  if (!out) detail::io_fail(path.string(), "cannot open for writing");
  out << "x,y,z";
  for (const AttrChannel& a : cloud.attributes) out << "," << a.name;
  out << "\n";
  for (size_t i = 0; i < cloud.points.size(); ++i) {
    out << detail::format_f32(cloud.points[i].x) << ","
        << detail::format_f32(cloud.points[i].y) << ","
        << detail::format_f32(cloud.points[i].z);
    for (const AttrChannel& a : cloud.attributes)
      out << "," << detail::format_f32(a.values[i]);
    out << "\n";
  }
  if (!out) detail::io_fail(path.string(), "write failed");
}

inline PointCloud read_cloud_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) detail::io_fail(path.string(), "cannot open");
  std::string line;
  if (!std::getline(in, line))
    throw Error(ErrorCode::ParseError, path.string() + ": missing header");
  std::vector<std::string> cols = detail::split(line, ',');
  if (cols.size() < 3 || cols[0] != "x" || cols[1] != "y" || cols[2] != "z")
    throw Error(ErrorCode::ParseError,
                path.string() + ": header must start with x,y,z");
  PointCloud cloud;
  for (size_t k = 3; k < cols.size(); ++k)
    cloud.attributes.push_back(AttrChannel{cols[k], {}});
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f = detail::split(line, ',');
    if (f.size() != cols.size())
      throw Error(ErrorCode::ParseError,
                  path.string() + ":" + std::to_string(line_no) +
                      ": expected " + std::to_string(cols.size()) +
                      " fields");
    auto parse = [&](const std::string& s) -> double {
      char* end = nullptr;
      float v = std::strtof(s.c_str(), &end);
      if (end == s.c_str() || *end != '\0')
        throw Error(ErrorCode::ParseError,
                    path.string() + ":" + std::to_string(line_no) +
                        ": bad number '" + s + "'");
      return static_cast<double>(v);
    };
    cloud.points.push_back(Vec3{parse(f[0]), parse(f[1]), parse(f[2])});
    for (size_t k = 3; k < f.size(); ++k)
      cloud.attributes[k - 3].values.push_back(parse(f[k]));
  }
  return cloud;
}

// 16 whitespace-separated reals, row-major, one line.
inline void write_pose(const std::filesystem::path& path, const Pose& pose) {
  std::ofstream out(path);
  if (!out) detail::io_fail(path.string(), "cannot open for writing");
  for (int i = 0; i < 16; ++i)
    out << (i ? " " : "") << detail::format_f64(pose.m[i]);
  out << "\n";
  if (!out) detail::io_fail(path.string(), "write failed");
}

inline Pose read_pose(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) detail::io_fail(path.string(), "cannot open");
  std::array<double, 16> m;
  for (int i = 0; i < 16; ++i) {
    if (!(in >> m[i]))
      throw Error(ErrorCode::ParseError,
                  path.string() + ": expected 16 reals");
  }
  return Pose::from_matrix(m);
}

// fx fy cx cy width height on one line.
inline void write_intrinsics(const std::filesystem::path& path,
                             const CameraIntrinsics& K) {
  std::ofstream out(path);
  if (!out) detail::io_fail(path.string(), "cannot open for writing");
  out << detail::format_f64(K.fx) << " " << detail::format_f64(K.fy) << " "
      << detail::format_f64(K.cx) << " " << detail::format_f64(K.cy) << " "
      << K.width << " " << K.height << "\n";
  if (!out) detail::io_fail(path.string(), "write failed");
}

inline CameraIntrinsics read_intrinsics(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) detail::io_fail(path.string(), "cannot open");
  CameraIntrinsics K;
  if (!(in >> K.fx >> K.fy >> K.cx >> K.cy >> K.width >> K.height))
    throw Error(ErrorCode::ParseError,
                path.string() + ": expected fx fy cx cy width height");
  K.validate();
  return K;
}

inline constexpr const char* kCheckpointMagic = "RCSML1";

// One-line ASCII shape header, then the flattened parameters as 64-bit
// little-endian reals in layer order (w1 b1 w2 b2 w3 b3).
inline void write_checkpoint(const std::filesystem::path& path,
                             const RefinerParams& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) detail::io_fail(path.string(), "cannot open for writing");
  std::vector<double> flat = params.flatten();
  out << kCheckpointMagic << " " << RefinerParams::kInChannels << " "
      << RefinerParams::kHidden << " 1 " << RefinerParams::kKernel << " "
      << flat.size() << "\n";
  if constexpr (!detail::host_little_endian()) {
    for (double& v : flat) {
      uint64_t u;
      std::memcpy(&u, &v, 8);
      u = __builtin_bswap64(u);
      std::memcpy(&v, &u, 8);
    }
  }
  out.write(reinterpret_cast<const char*>(flat.data()),
            static_cast<std::streamsize>(flat.size() * sizeof(double)));
  if (!out) detail::io_fail(path.string(), "write failed");
}

inline RefinerParams read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) detail::io_fail(path.string(), "cannot open");
  std::string magic;
  int in_ch = 0, hidden = 0, out_ch = 0, kernel = 0;
  size_t count = 0;
  in >> magic >> in_ch >> hidden >> out_ch >> kernel >> count;
  if (!in || magic != kCheckpointMagic)
    throw Error(ErrorCode::ParseError,
                path.string() + ": not a refiner checkpoint");
  if (in_ch != RefinerParams::kInChannels || hidden != RefinerParams::kHidden ||
      out_ch != 1 || kernel != RefinerParams::kKernel)
    throw Error(ErrorCode::ShapeMismatch,
                path.string() + ": checkpoint layer shapes differ");
  in.get();  // newline
  std::vector<double> flat(count);
  in.read(reinterpret_cast<char*>(flat.data()),
          static_cast<std::streamsize>(count * sizeof(double)));
  if (!in) detail::io_fail(path.string(), "truncated checkpoint");
  if constexpr (!detail::host_little_endian()) {
    for (double& v : flat) {
      uint64_t u;
      std::memcpy(&u, &v, 8);
      u = __builtin_bswap64(u);
      std::memcpy(&v, &u, 8);
    }
  }
  return RefinerParams::from_flat(flat);
}

struct MetricsRow {
  std::string frame;
  std::string target;  // which map d_hat was evaluated against
  MetricsReport report;
};

inline constexpr const char* kMetricsHeader =
    "frame,target,range_cap_m,n_pixels,mae_mm,rmse_mm,imae_per_km,"
    "irmse_per_km,absrel,sqrel_mm,delta1";

inline void write_metrics_csv(const std::filesystem::path& path,
                              const std::vector<MetricsRow>& rows) {
  std::ofstream out(path);
  if (!out) detail::io_fail(path.string(), "cannot open for writing");
  out << kMetricsHeader << "\n";
  for (const MetricsRow& r : rows) {
    out << r.frame << "," << r.target << ","
        << detail::format_f64(r.report.range_cap_m) << "," << r.report.n_pixels
        << "," << detail::format_f64(r.report.mae_mm) << ","
        << detail::format_f64(r.report.rmse_mm) << ","
        << detail::format_f64(r.report.imae_per_km) << ","
        << detail::format_f64(r.report.irmse_per_km) << ","
        << detail::format_f64(r.report.absrel) << ","
        << detail::format_f64(r.report.sqrel_mm) << ","
        << detail::format_f64(r.report.delta1) << "\n";
  }
  if (!out) detail::io_fail(path.string(), "write failed");
}

inline std::vector<MetricsRow> read_metrics_csv(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) detail::io_fail(path.string(), "cannot open");
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader)
    throw Error(ErrorCode::ParseError, path.string() + ": bad metrics header");
  std::vector<MetricsRow> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f = detail::split(line, ',');
    if (f.size() != 11)
      throw Error(ErrorCode::ParseError, path.string() + ":" +
                                             std::to_string(line_no) +
                                             ": expected 11 fields");
    MetricsRow r;
    r.frame = f[0];
    r.target = f[1];
    r.report.range_cap_m = std::stod(f[2]);
    r.report.n_pixels = static_cast<size_t>(std::stoull(f[3]));
    r.report.mae_mm = std::stod(f[4]);
    r.report.rmse_mm = std::stod(f[5]);
    r.report.imae_per_km = std::stod(f[6]);
    r.report.irmse_per_km = std::stod(f[7]);
    r.report.absrel = std::stod(f[8]);
    r.report.sqrel_mm = std::stod(f[9]);
    r.report.delta1 = std::stod(f[10]);
    rows.push_back(std::move(r));
  }
  return rows;
}

inline void write_loss_history_csv(const std::filesystem::path& path,
                                   const std::vector<double>& history) {
  std::ofstream out(path);
  if (!out) detail::io_fail(path.string(), "cannot open for writing");
  out << "iteration,loss\n";
  for (size_t i = 0; i < history.size(); ++i)
    out << i << "," << detail::format_f64(history[i]) << "\n";
  if (!out) detail::io_fail(path.string(), "write failed");
}

inline std::vector<std::string> read_index(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) detail::io_fail(path.string(), "cannot open");
  std::vector<std::string> frames;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) frames.push_back(line);
  }
  return frames;
}

inline void write_index(const std::filesystem::path& path,
                        const std::vector<std::string>& frames) {
  std::ofstream out(path);
  if (!out) detail::io_fail(path.string(), "cannot open for writing");
  for (const std::string& f : frames) out << f << "\n";
  if (!out) detail::io_fail(path.string(), "write failed");
}

}  // namespace rcdepth
