#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "rcdepth/align.hpp"
#include "rcdepth/geometry.hpp"
#include "rcdepth/interpolate.hpp"
#include "rcdepth/io/config_io.hpp"
#include "rcdepth/io/image_io.hpp"
#include "rcdepth/io/text_io.hpp"
#include "rcdepth/map_ops.hpp"
#include "rcdepth/quasidense.hpp"
#include "rcdepth/refine.hpp"
#include "rcdepth/synth.hpp"

namespace rcdepth {

// Everything one frame needs to run the alignment + scale stages.
struct FrameInputs {
  FloatMap gt;     // dense metric reference
  FloatMap d_int;  // densified supervision depth
  FloatMap mono;   // scaleless prediction (kind must match the fit space)
  PointCloud radar;
  CameraIntrinsics K;
  std::vector<uint8_t> mask;  // empty = all pass
};

struct FrameResult {
  AlignmentParams ga{1.0, 0.0, AlignSpace::InverseDepthSpace};
  FloatMap radar_depth;
  AlignedMaps aligned;
  FloatMap d_q;
  FloatMap s_q;
  FloatMap inv_s_q;
  FloatMap residual;
  ComposeResult composed;
};

// Oracle stack: label-gate confidences against d_int for every radar point
// that projects in view.
inline ConfidenceStack build_oracle_stack(const PointCloud& radar,
                                          const CameraIntrinsics& K,
                                          const FloatMap& d_int, int patch_w,
                                          int patch_h) {
  ConfidenceStack stack;
  stack.width = K.width;
  stack.height = K.height;
  stack.cloud = radar;
  for (size_t i = 0; i < radar.points.size(); ++i) {
    PatchWindow win;
    try {
      win = make_patch_window(radar.points[i], K, patch_w, patch_h);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::OutOfView) continue;
      throw;
    }
    stack.patches.push_back(oracle_confidence(
        radar.points[i], static_cast<int>(i), win, d_int));
  }
  return stack;
}

inline AlignmentParams fit_global_alignment(const Correspondences& corr,
                                            const HarnessConfig& cfg,
                                            uint64_t frame_seed) {
  switch (cfg.ga) {
    case GaMethod::Const:
      if (!cfg.const_scale)
        throw Error(ErrorCode::InvalidParams,
                    "const alignment needs a scale estimate");
      return AlignmentParams::make(*cfg.const_scale, 0.0, cfg.space);
    case GaMethod::Var:
      return fit_var(corr, cfg.space);
    case GaMethod::Ls:
      return fit_ls(corr, cfg.space);
    case GaMethod::Ransac: {
      RansacOptions opt;
      opt.space = cfg.space;
      opt.refit_on_inliers = cfg.ransac_refit;
      return fit_ransac(corr, frame_seed, opt);
    }
  }
  throw Error(ErrorCode::InvalidParams, "unknown alignment method");
}

// Alignment -> quasi-dense scale -> composition for one frame. `file_stack`
// supplies confidences in Files mode; `refiner` supplies the residual model
// in Checkpoint mode.
inline FrameResult run_frame(const FrameInputs& in, const HarnessConfig& cfg,
                             uint64_t frame_seed,
                             const ConfidenceStack* file_stack = nullptr,
                             const RefinerParams* refiner = nullptr) {
  FrameResult out;
  out.radar_depth = project_points(in.radar, in.K);
  if (!in.mask.empty())
    out.radar_depth =
        apply_mask(out.radar_depth, in.mask, in.K.width, in.K.height);

  Correspondences corr = build_correspondences(in.mono, out.radar_depth);
  out.ga = fit_global_alignment(corr, cfg, frame_seed);
  out.aligned = apply_alignment(in.mono, out.ga);

  ConfidenceStack oracle_stack;
  const ConfidenceStack* stack = file_stack;
  if (cfg.confidence == ConfidenceMode::Oracle) {
    oracle_stack = build_oracle_stack(in.radar, in.K, in.d_int, cfg.patch_w,
                                      cfg.patch_h);
    stack = &oracle_stack;
  }
  if (stack == nullptr)
    throw Error(ErrorCode::InvalidParams,
                "files confidence mode without a loaded stack");

  out.d_q = assemble_quasi_dense(*stack, cfg.tau);
  ScaleMaps scales = compute_scale_map(out.d_q, out.aligned.d_ga);
  out.s_q = std::move(scales.s_q);
  out.inv_s_q = std::move(scales.inv_s_q_filled);

  if (cfg.residual == ResidualMode::Checkpoint) {
    if (refiner == nullptr)
      throw Error(ErrorCode::InvalidParams,
                  "checkpoint residual mode without loaded parameters");
    out.residual = refiner_forward(*refiner, out.aligned.z_ga, out.inv_s_q);
  } else {
    out.residual = FloatMap::constant(MapKind::Residual, in.K.width,
                                      in.K.height, 0.0);
  }
  out.composed = compose(out.aligned.z_ga, out.residual);
  return out;
}

// ---------------------------------------------------------------------------
// Confidence stack files: conf/index.csv (point_index,x0,y0,w,h,file) plus
// one dense PFM per patch. This is the surface an external association
// network writes.

inline void write_confidence_stack(const std::filesystem::path& dir,
                                   const ConfidenceStack& stack) {
  std::filesystem::create_directories(dir);
  std::ofstream index(dir / "index.csv");
  if (!index) detail::io_fail((dir / "index.csv").string(), "cannot open");
  index << "point_index,x0,y0,w,h,file\n";
  for (size_t k = 0; k < stack.patches.size(); ++k) {
    const ConfidencePatch& p = stack.patches[k];
    char name[32];
    std::snprintf(name, sizeof(name), "patch_%04zu.pfm", k);
    FloatMap m(MapKind::Confidence, p.window.w, p.window.h);
    m.values = p.conf;
    std::fill(m.valid.begin(), m.valid.end(), uint8_t{1});
    write_pfm(dir / name, m);
    index << p.point_index << "," << p.window.x0 << "," << p.window.y0 << ","
          << p.window.w << "," << p.window.h << "," << name << "\n";
  }
  if (!index) detail::io_fail((dir / "index.csv").string(), "write failed");
}

inline ConfidenceStack read_confidence_stack(const std::filesystem::path& dir,
                                             const PointCloud& cloud, int width,
                                             int height) {
  ConfidenceStack stack;
  stack.width = width;
  stack.height = height;
  stack.cloud = cloud;
  std::ifstream index(dir / "index.csv");
  if (!index) detail::io_fail((dir / "index.csv").string(), "cannot open");
  std::string line;
  if (!std::getline(index, line) || line != "point_index,x0,y0,w,h,file")
    throw Error(ErrorCode::ParseError,
                (dir / "index.csv").string() + ": bad header");
  int line_no = 1;
  std::vector<uint8_t> seen(cloud.size(), 0);
  while (std::getline(index, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f = detail::split(line, ',');
    if (f.size() != 6)
      throw Error(ErrorCode::ParseError,
                  (dir / "index.csv").string() + ":" +
                      std::to_string(line_no) + ": expected 6 fields");
    ConfidencePatch p;
    p.point_index = std::stoi(f[0]);
    p.window.x0 = std::stoi(f[1]);
    p.window.y0 = std::stoi(f[2]);
    p.window.w = std::stoi(f[3]);
    p.window.h = std::stoi(f[4]);
    if (p.point_index < 0 ||
        p.point_index >= static_cast<int>(cloud.size()) ||
        seen[p.point_index])
      throw Error(ErrorCode::ParseError,
                  (dir / "index.csv").string() + ":" +
                      std::to_string(line_no) +
                      ": bad or duplicate point index");
    seen[p.point_index] = 1;
    if (p.window.x0 < 0 || p.window.y0 < 0 || p.window.w <= 0 ||
        p.window.h <= 0 || p.window.x0 + p.window.w > width ||
        p.window.y0 + p.window.h > height)
      throw Error(ErrorCode::ParseError,
                  (dir / "index.csv").string() + ":" +
                      std::to_string(line_no) + ": window outside image");
    FloatMap m = read_pfm(dir / f[5], MapKind::Confidence);
    if (m.width != p.window.w || m.height != p.window.h)
      throw Error(ErrorCode::ShapeMismatch,
                  f[5] + ": patch shape differs from window");
    p.conf = std::move(m.values);
    stack.patches.push_back(std::move(p));
  }
  return stack;
}

}  // namespace rcdepth
