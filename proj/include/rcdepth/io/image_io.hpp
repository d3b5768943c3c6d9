#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "rcdepth/types.hpp"

namespace rcdepth {

namespace detail {

inline void io_fail(const std::string& path, const std::string& what) {
  throw Error(ErrorCode::IoError, path + ": " + what);
}

inline float byteswap_f32(float v) {
  uint32_t u;
  std::memcpy(&u, &v, 4);
  u = ((u & 0x000000FFu) << 24) | ((u & 0x0000FF00u) << 8) |
      ((u & 0x00FF0000u) >> 8) | ((u & 0xFF000000u) >> 24);
  std::memcpy(&v, &u, 4);
  return v;
}

inline constexpr bool host_little_endian() {
  return std::endian::native == std::endian::little;
}

// Reads one whitespace-delimited token, skipping '#' comment lines.
inline std::string next_token(std::istream& in) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (!std::isspace(c)) {
      tok.push_back(static_cast<char>(c));
      break;
    }
  }
  while ((c = in.get()) != EOF && !std::isspace(c))
    tok.push_back(static_cast<char>(c));
  return tok;
}

}  // namespace detail

// Grayscale portable float map, "Pf", negative scale = little-endian
// payload, rows stored bottom to top. Values are written as 32-bit floats.
inline void write_pfm(const std::filesystem::path& path, const FloatMap& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) detail::io_fail(path.string(), "cannot open for writing");
  out << "Pf\n" << m.width << " " << m.height << "\n-1.0\n";
  std::vector<float> row(m.width);
  for (int y = m.height - 1; y >= 0; --y) {
    for (int x = 0; x < m.width; ++x) {
      float v = static_cast<float>(m.at(y, x));
      if (!detail::host_little_endian()) v = detail::byteswap_f32(v);
      row[x] = v;
    }
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(sizeof(float)) * m.width);
  }
  if (!out) detail::io_fail(path.string(), "write failed");
}

inline FloatMap read_pfm(const std::filesystem::path& path, MapKind kind) {
  std::ifstream in(path, std::ios::binary);
  if (!in) detail::io_fail(path.string(), "cannot open");
  std::string magic = detail::next_token(in);
  if (magic != "Pf")
    throw Error(ErrorCode::ParseError,
                path.string() + ": expected grayscale PFM (Pf), got '" +
                    magic + "'");
  int w = 0, h = 0;
  double scale = 0.0;
  try {
    w = std::stoi(detail::next_token(in));
    h = std::stoi(detail::next_token(in));
    scale = std::stod(detail::next_token(in));
  } catch (const std::exception&) {
    throw Error(ErrorCode::ParseError, path.string() + ": bad PFM header");
  }
  if (w <= 0 || h <= 0 || scale == 0.0)
    throw Error(ErrorCode::ParseError, path.string() + ": bad PFM header");
  // next_token consumed the single whitespace ending the header

  bool file_little = scale < 0.0;
  FloatMap m(kind, w, h);
  std::vector<float> row(w);
  for (int y = h - 1; y >= 0; --y) {
    in.read(reinterpret_cast<char*>(row.data()),
            static_cast<std::streamsize>(sizeof(float)) * w);
    if (!in) detail::io_fail(path.string(), "truncated PFM payload");
    for (int x = 0; x < w; ++x) {
      float v = row[x];
      if (file_little != detail::host_little_endian())
        v = detail::byteswap_f32(v);
      m.at(y, x) = static_cast<double>(v);
      m.valid[m.idx(y, x)] = 1;
    }
  }
  return m;
}

// Binary PGM, maxval 255, used for validity and dynamic-object masks.
// Nonzero bytes mark valid pixels.
inline void write_pgm_mask(const std::filesystem::path& path,
                           const std::vector<uint8_t>& mask, int w, int h) {
  if (mask.size() != static_cast<size_t>(w) * h)
    throw Error(ErrorCode::ShapeMismatch, "mask size does not match w*h");
  std::ofstream out(path, std::ios::binary);
  if (!out) detail::io_fail(path.string(), "cannot open for writing");
  out << "P5\n" << w << " " << h << "\n255\n";
  std::vector<uint8_t> bytes(mask.size());
  for (size_t i = 0; i < mask.size(); ++i) bytes[i] = mask[i] ? 255 : 0;
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) detail::io_fail(path.string(), "write failed");
}

struct MaskImage {
  int width = 0, height = 0;
  std::vector<uint8_t> mask;  // 1 = valid / keep
};

inline MaskImage read_pgm_mask(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) detail::io_fail(path.string(), "cannot open");
  std::string magic = detail::next_token(in);
  if (magic != "P5")
    throw Error(ErrorCode::ParseError,
                path.string() + ": expected binary PGM (P5)");
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(detail::next_token(in));
    h = std::stoi(detail::next_token(in));
    maxval = std::stoi(detail::next_token(in));
  } catch (const std::exception&) {
    throw Error(ErrorCode::ParseError, path.string() + ": bad PGM header");
  }
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255)
    throw Error(ErrorCode::ParseError, path.string() + ": bad PGM header");
  MaskImage img;
  img.width = w;
  img.height = h;
  std::vector<uint8_t> bytes(static_cast<size_t>(w) * h);
  in.read(reinterpret_cast<char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (!in) detail::io_fail(path.string(), "truncated PGM payload");
  img.mask.resize(bytes.size());
  for (size_t i = 0; i < bytes.size(); ++i) img.mask[i] = bytes[i] ? 1 : 0;
  return img;
}

// Writes a FloatMap as name.pfm plus its validity as name_valid.pgm.
inline void write_map_with_mask(const std::filesystem::path& dir,
                                const std::string& name, const FloatMap& m) {
  write_pfm(dir / (name + ".pfm"), m);
  write_pgm_mask(dir / (name + "_valid.pgm"), m.valid, m.width, m.height);
}

inline FloatMap read_map_with_mask(const std::filesystem::path& dir,
                                   const std::string& name, MapKind kind) {
  FloatMap m = read_pfm(dir / (name + ".pfm"), kind);
  MaskImage valid = read_pgm_mask(dir / (name + "_valid.pgm"));
  if (valid.width != m.width || valid.height != m.height)
    throw Error(ErrorCode::ShapeMismatch,
                name + ": validity mask shape differs from map");
  m.valid = valid.mask;
  for (size_t i = 0; i < m.size(); ++i)
    if (!m.valid[i]) m.values[i] = 0.0;
  return m;
}

// Binary PPM for rendered error maps.
inline void write_ppm(const std::filesystem::path& path,
                      const std::vector<uint8_t>& rgb, int w, int h) {
  if (rgb.size() != static_cast<size_t>(w) * h * 3)
    throw Error(ErrorCode::ShapeMismatch, "rgb size does not match 3*w*h");
  std::ofstream out(path, std::ios::binary);
  if (!out) detail::io_fail(path.string(), "cannot open for writing");
  out << "P6\n" << w << " " << h << "\n255\n";
  out.write(reinterpret_cast<const char*>(rgb.data()),
            static_cast<std::streamsize>(rgb.size()));
  if (!out) detail::io_fail(path.string(), "write failed");
}

}  // namespace rcdepth
