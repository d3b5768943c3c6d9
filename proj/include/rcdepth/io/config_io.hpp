#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "rcdepth/align.hpp"
#include "rcdepth/io/text_io.hpp"
#include "rcdepth/refine.hpp"
#include "rcdepth/synth.hpp"
#include "rcdepth/types.hpp"

namespace rcdepth {

struct KeyValue {
  std::string key;
  std::string value;
  int line = 0;
};

// Flat key=value file; '#' starts a comment, blank lines ignored. Keys not
// in `allowed` fail fast with their line number.
inline std::vector<KeyValue> parse_kv_file(const std::filesystem::path& path,
                                           const std::set<std::string>& allowed) {
  std::ifstream in(path);
  if (!in) detail::io_fail(path.string(), "cannot open");
  std::vector<KeyValue> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    size_t begin = line.find_first_not_of(" \t\r");
    if (begin == std::string::npos) continue;
    size_t end = line.find_last_not_of(" \t\r");
    line = line.substr(begin, end - begin + 1);
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorCode::ParseError,
                  path.string() + ":" + std::to_string(line_no) +
                      ": expected key=value");
    KeyValue kv;
    kv.key = line.substr(0, eq);
    kv.value = line.substr(eq + 1);
    kv.line = line_no;
    auto strip = [](std::string& s) {
      size_t b = s.find_first_not_of(" \t");
      size_t e = s.find_last_not_of(" \t");
      s = (b == std::string::npos) ? "" : s.substr(b, e - b + 1);
    };
    strip(kv.key);
    strip(kv.value);
    if (!allowed.count(kv.key))
      throw Error(ErrorCode::ParseError,
                  path.string() + ":" + std::to_string(line_no) +
                      ": unknown key '" + kv.key + "'");
    out.push_back(std::move(kv));
  }
  return out;
}

namespace detail {

inline double parse_double(const KeyValue& kv, const std::string& file) {
  try {
    size_t pos = 0;
    double v = std::stod(kv.value, &pos);
    if (pos != kv.value.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::ParseError, file + ":" + std::to_string(kv.line) +
                                           ": bad number '" + kv.value + "'");
  }
}

inline long long parse_int(const KeyValue& kv, const std::string& file) {
  try {
    size_t pos = 0;
    long long v = std::stoll(kv.value, &pos);
    if (pos != kv.value.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::ParseError, file + ":" + std::to_string(kv.line) +
                                           ": bad integer '" + kv.value + "'");
  }
}

inline std::vector<double> parse_double_list(const KeyValue& kv,
                                             const std::string& file) {
  std::vector<double> out;
  for (const std::string& part : split(kv.value, ',')) {
    KeyValue sub{kv.key, part, kv.line};
    out.push_back(parse_double(sub, file));
  }
  return out;
}

}  // namespace detail

inline const std::set<std::string>& scene_spec_keys() {
  static const std::set<std::string> keys = {
      "width",          "height",
      "fx",             "fy",
      "cx",             "cy",
      "frames",         "seed",
      "ground_height",  "max_depth",
      "wall",           "random_walls",
      "radar_points",   "radar_sigma",
      "radar_jitter_px", "radar_outlier_frac",
      "radar_max_range", "radar_row_bias",
      "lidar_stride",   "mono_a",
      "mono_b",         "mono_gamma"};
  return keys;
}

// Scene spec as a key=value file; `wall = z,x0,x1,y0,y1` may repeat.
inline SceneSpec read_scene_spec(const std::filesystem::path& path) {
  std::vector<KeyValue> kvs = parse_kv_file(path, scene_spec_keys());
  const std::string file = path.string();
  SceneSpec spec;
  bool have_cx = false, have_cy = false;
  for (const KeyValue& kv : kvs) {
    if (kv.key == "width") spec.width = static_cast<int>(detail::parse_int(kv, file));
    else if (kv.key == "height") spec.height = static_cast<int>(detail::parse_int(kv, file));
    else if (kv.key == "fx") spec.fx = detail::parse_double(kv, file);
    else if (kv.key == "fy") spec.fy = detail::parse_double(kv, file);
    else if (kv.key == "cx") { spec.cx = detail::parse_double(kv, file); have_cx = true; }
    else if (kv.key == "cy") { spec.cy = detail::parse_double(kv, file); have_cy = true; }
    else if (kv.key == "frames") spec.frames = static_cast<int>(detail::parse_int(kv, file));
    else if (kv.key == "seed") spec.seed = static_cast<uint64_t>(detail::parse_int(kv, file));
    else if (kv.key == "ground_height") {
      spec.has_ground = true;
      spec.ground_height_m = detail::parse_double(kv, file);
    } else if (kv.key == "max_depth") spec.max_depth_m = detail::parse_double(kv, file);
    else if (kv.key == "wall") {
      std::vector<double> v = detail::parse_double_list(kv, file);
      if (v.size() != 5)
        throw Error(ErrorCode::ParseError,
                    file + ":" + std::to_string(kv.line) +
                        ": wall needs z,x0,x1,y0,y1");
      spec.walls.push_back(WallSpec{v[0], v[1], v[2], v[3], v[4]});
    } else if (kv.key == "random_walls") spec.random_walls = static_cast<int>(detail::parse_int(kv, file));
    else if (kv.key == "radar_points") spec.radar_points = static_cast<int>(detail::parse_int(kv, file));
    else if (kv.key == "radar_sigma") spec.radar_sigma_m = detail::parse_double(kv, file);
    else if (kv.key == "radar_jitter_px") spec.radar_jitter_px = detail::parse_double(kv, file);
    else if (kv.key == "radar_outlier_frac") spec.radar_outlier_frac = detail::parse_double(kv, file);
    else if (kv.key == "radar_max_range") spec.radar_max_range_m = detail::parse_double(kv, file);
    else if (kv.key == "radar_row_bias") spec.radar_row_bias = detail::parse_double(kv, file);
    else if (kv.key == "lidar_stride") spec.lidar_stride = static_cast<int>(detail::parse_int(kv, file));
    else if (kv.key == "mono_a") spec.mono_a = detail::parse_double(kv, file);
    else if (kv.key == "mono_b") spec.mono_b = detail::parse_double(kv, file);
    else if (kv.key == "mono_gamma") spec.mono_gamma = detail::parse_double(kv, file);
  }
  if (!have_cx) spec.cx = (spec.width - 1) / 2.0;
  if (!have_cy) spec.cy = (spec.height - 1) / 2.0;
  if (spec.width < 2 || spec.height < 2)
    throw Error(ErrorCode::ParseError, file + ": image size below 2x2");
  if (spec.frames < 1)
    throw Error(ErrorCode::ParseError, file + ": frames must be >= 1");
  if (spec.radar_outlier_frac < 0.0 || spec.radar_outlier_frac >= 1.0)
    throw Error(ErrorCode::ParseError,
                file + ": radar_outlier_frac must be in [0, 1)");
  if (spec.radar_sigma_m < 0.0)
    throw Error(ErrorCode::ParseError, file + ": radar_sigma must be >= 0");
  return spec;
}

enum class GaMethod : uint8_t { Const, Var, Ls, Ransac };
enum class ConfidenceMode : uint8_t { Oracle, Files };
enum class ResidualMode : uint8_t { Zero, Checkpoint };
enum class EvalTarget : uint8_t { Gt, Dint };

// Union of run and train-sml settings; each command checks what it needs.
struct HarnessConfig {
  GaMethod ga = GaMethod::Ls;
  bool ga_compare = false;
  AlignSpace space = AlignSpace::InverseDepthSpace;
  double tau = 0.5;
  int patch_w = 64;
  int patch_h = 48;
  ConfidenceMode confidence = ConfidenceMode::Oracle;
  ResidualMode residual = ResidualMode::Zero;
  std::string checkpoint;
  std::vector<double> range_caps = {50.0, 70.0, 80.0};
  uint64_t seed = 0;
  EvalTarget eval_target = EvalTarget::Gt;
  bool ransac_refit = false;
  std::optional<double> const_scale;

  // training
  double learning_rate = 1e-3;
  int iterations = 200;
  double lambda_gt = 1.0;
  double beta = 1.0;
  double momentum = 0.0;
  bool guarded = true;
  double init_gain = 0.1;
};

inline const std::set<std::string>& harness_config_keys() {
  static const std::set<std::string> keys = {
      "ga",           "space",        "tau",         "patch_w",
      "patch_h",      "confidence",   "residual",    "checkpoint",
      "range_caps",   "seed",         "eval_target", "ransac_refit",
      "const_scale",  "learning_rate", "iterations",  "lambda_gt",
      "beta",         "momentum",     "guarded",     "init_gain"};
  return keys;
}

inline HarnessConfig read_harness_config(const std::filesystem::path& path) {
  std::vector<KeyValue> kvs = parse_kv_file(path, harness_config_keys());
  const std::string file = path.string();
  HarnessConfig cfg;
  for (const KeyValue& kv : kvs) {
    if (kv.key == "ga") {
      if (kv.value == "const") cfg.ga = GaMethod::Const;
      else if (kv.value == "var") cfg.ga = GaMethod::Var;
      else if (kv.value == "ls") cfg.ga = GaMethod::Ls;
      else if (kv.value == "ransac") cfg.ga = GaMethod::Ransac;
      else if (kv.value == "compare") cfg.ga_compare = true;
      else
        throw Error(ErrorCode::ParseError,
                    file + ":" + std::to_string(kv.line) +
                        ": ga must be const|var|ls|ransac|compare");
    } else if (kv.key == "space") {
      if (kv.value == "inverse") cfg.space = AlignSpace::InverseDepthSpace;
      else if (kv.value == "depth") cfg.space = AlignSpace::DepthSpace;
      else
        throw Error(ErrorCode::ParseError,
                    file + ":" + std::to_string(kv.line) +
                        ": space must be inverse|depth");
    } else if (kv.key == "tau") cfg.tau = detail::parse_double(kv, file);
    else if (kv.key == "patch_w") cfg.patch_w = static_cast<int>(detail::parse_int(kv, file));
    else if (kv.key == "patch_h") cfg.patch_h = static_cast<int>(detail::parse_int(kv, file));
    else if (kv.key == "confidence") {
      if (kv.value == "oracle") cfg.confidence = ConfidenceMode::Oracle;
      else if (kv.value == "files") cfg.confidence = ConfidenceMode::Files;
      else
        throw Error(ErrorCode::ParseError,
                    file + ":" + std::to_string(kv.line) +
                        ": confidence must be oracle|files");
    } else if (kv.key == "residual") {
      if (kv.value == "zero") cfg.residual = ResidualMode::Zero;
      else if (kv.value == "checkpoint") cfg.residual = ResidualMode::Checkpoint;
      else
        throw Error(ErrorCode::ParseError,
                    file + ":" + std::to_string(kv.line) +
                        ": residual must be zero|checkpoint");
    } else if (kv.key == "checkpoint") cfg.checkpoint = kv.value;
    else if (kv.key == "range_caps") cfg.range_caps = detail::parse_double_list(kv, file);
    else if (kv.key == "seed") cfg.seed = static_cast<uint64_t>(detail::parse_int(kv, file));
    else if (kv.key == "eval_target") {
      if (kv.value == "gt") cfg.eval_target = EvalTarget::Gt;
      else if (kv.value == "dint") cfg.eval_target = EvalTarget::Dint;
      else
        throw Error(ErrorCode::ParseError,
                    file + ":" + std::to_string(kv.line) +
                        ": eval_target must be gt|dint");
    } else if (kv.key == "ransac_refit") cfg.ransac_refit = detail::parse_int(kv, file) != 0;
    else if (kv.key == "const_scale") cfg.const_scale = detail::parse_double(kv, file);
    else if (kv.key == "learning_rate") cfg.learning_rate = detail::parse_double(kv, file);
    else if (kv.key == "iterations") cfg.iterations = static_cast<int>(detail::parse_int(kv, file));
    else if (kv.key == "lambda_gt") cfg.lambda_gt = detail::parse_double(kv, file);
    else if (kv.key == "beta") cfg.beta = detail::parse_double(kv, file);
    else if (kv.key == "momentum") cfg.momentum = detail::parse_double(kv, file);
    else if (kv.key == "guarded") cfg.guarded = detail::parse_int(kv, file) != 0;
    else if (kv.key == "init_gain") cfg.init_gain = detail::parse_double(kv, file);
  }
  if (cfg.residual == ResidualMode::Checkpoint && cfg.checkpoint.empty())
    throw Error(ErrorCode::ParseError,
                file + ": residual=checkpoint requires checkpoint=<path>");
  if (cfg.range_caps.empty())
    throw Error(ErrorCode::ParseError, file + ": range_caps must be nonempty");
  return cfg;
}

}  // namespace rcdepth
