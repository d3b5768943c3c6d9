#pragma once

#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "rcdepth/pipeline.hpp"

namespace rcdepth {

namespace detail {

// Runs fn(0..n-1) on a small worker pool. fn must not throw; workers own
// disjoint outputs so results do not depend on the job count.
inline void parallel_frames(size_t n, int jobs,
                            const std::function<void(size_t)>& fn) {
  jobs = std::max(1, jobs);
  if (jobs == 1 || n <= 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<size_t> next{0};
  std::vector<std::thread> pool;
  for (int t = 0; t < jobs; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        size_t i = next.fetch_add(1);
        if (i >= n) return;
        fn(i);
      }
    });
  }
  for (std::thread& t : pool) t.join();
}

inline std::string frame_dir_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frame_%04d", index);
  return buf;
}

}  // namespace detail

// CLI exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFrameFailures = 1;
inline constexpr int kExitDivergence = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitUsage = 4;

struct GenOptions {
  std::optional<uint64_t> seed;
  int jobs = 1;
};

// Render, sample and write one dataset: per-frame gt / dint / mono maps,
// radar and lidar clouds, mask, intrinsics, pose, plus an index file.
inline int cmd_gen(const std::filesystem::path& spec_path,
                   const std::filesystem::path& out_dir,
                   const GenOptions& opt = {}) {
  SceneSpec spec = read_scene_spec(spec_path);
  if (opt.seed) spec.seed = *opt.seed;

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec)
    throw Error(ErrorCode::IoError,
                out_dir.string() + ": cannot create output directory");

  std::vector<std::string> names(spec.frames);
  std::vector<std::string> errors(spec.frames);
  detail::parallel_frames(
      static_cast<size_t>(spec.frames), opt.jobs, [&](size_t f) {
        try {
          SceneSpec fs = scene_for_frame(spec, static_cast<int>(f));
          CameraIntrinsics K = fs.intrinsics();
          FloatMap gt = render_gt(fs);
          PointCloud lidar = sample_lidar(fs, gt);
          PointCloud radar = sample_radar(fs, gt);
          FloatMap mono = distort_mono(fs, gt);
          std::vector<uint8_t> mask(gt.size(), 1);

          FloatMap d_sparse = apply_mask(project_points(lidar, K), mask,
                                         K.width, K.height);
          FloatMap d_int = interpolate_log(d_sparse);

          std::string name = detail::frame_dir_name(static_cast<int>(f));
          std::filesystem::path dir = out_dir / name;
          std::filesystem::create_directories(dir);
          write_map_with_mask(dir, "gt", gt);
          write_map_with_mask(dir, "dint", d_int);
          write_map_with_mask(dir, "mono", mono);
          write_cloud_csv(dir / "radar.csv", radar);
          write_cloud_csv(dir / "lidar.csv", lidar);
          write_pgm_mask(dir / "mask.pgm", mask, K.width, K.height);
          write_intrinsics(dir / "intrinsics.txt", K);
          write_pose(dir / "pose.txt", Pose::identity());
          names[f] = name;
        } catch (const std::exception& e) {
          errors[f] = e.what();
        }
      });

  for (size_t f = 0; f < errors.size(); ++f) {
    if (!errors[f].empty())
      throw Error(ErrorCode::IoError, "frame " + std::to_string(f) + ": " +
                                          errors[f]);
  }
  write_index(out_dir / "index.txt", names);
  return kExitOk;
}

// Reads a map plus its validity sibling when present; a bare PFM is fully
// valid.
inline FloatMap read_map_auto(const std::filesystem::path& pfm_path,
                              MapKind kind) {
  FloatMap m = read_pfm(pfm_path, kind);
  std::filesystem::path sibling = pfm_path;
  sibling.replace_extension();
  sibling += "_valid.pgm";
  if (std::filesystem::exists(sibling)) {
    MaskImage valid = read_pgm_mask(sibling);
    if (valid.width != m.width || valid.height != m.height)
      throw Error(ErrorCode::ShapeMismatch,
                  sibling.string() + ": validity mask shape differs");
    m.valid = valid.mask;
    for (size_t i = 0; i < m.size(); ++i)
      if (!m.valid[i]) m.values[i] = 0.0;
  }
  return m;
}

inline FrameInputs load_frame_inputs(const std::filesystem::path& frame_dir,
                                     AlignSpace space) {
  FrameInputs in;
  in.gt = read_map_with_mask(frame_dir, "gt", MapKind::Depth);
  in.d_int = read_map_with_mask(frame_dir, "dint", MapKind::Depth);
  in.mono = read_map_with_mask(frame_dir, "mono",
                               space == AlignSpace::InverseDepthSpace
                                   ? MapKind::InverseDepth
                                   : MapKind::Depth);
  in.radar = read_cloud_csv(frame_dir / "radar.csv");
  in.K = read_intrinsics(frame_dir / "intrinsics.txt");
  MaskImage mask = read_pgm_mask(frame_dir / "mask.pgm");
  if (mask.width != in.K.width || mask.height != in.K.height)
    throw Error(ErrorCode::ShapeMismatch, "mask shape differs from image");
  in.mask = mask.mask;
  return in;
}

struct RunOptions {
  std::optional<uint64_t> seed;
  std::optional<std::string> ga;
  std::optional<double> tau;
  std::optional<std::vector<double>> range_caps;
  int jobs = 1;
};

namespace detail {

inline void apply_run_overrides(HarnessConfig& cfg, const RunOptions& opt) {
  if (opt.seed) cfg.seed = *opt.seed;
  if (opt.tau) cfg.tau = *opt.tau;
  if (opt.range_caps) cfg.range_caps = *opt.range_caps;
  if (opt.ga) {
    const std::string& g = *opt.ga;
    cfg.ga_compare = false;
    if (g == "const") cfg.ga = GaMethod::Const;
    else if (g == "var") cfg.ga = GaMethod::Var;
    else if (g == "ls") cfg.ga = GaMethod::Ls;
    else if (g == "ransac") cfg.ga = GaMethod::Ransac;
    else if (g == "compare") cfg.ga_compare = true;
    else
      throw Error(ErrorCode::UsageError,
                  "--ga must be const|var|ls|ransac|compare");
  }
}

// Mean of per-frame scale-only estimates, in frame order.
inline double const_scale_prepass(
    const std::vector<std::filesystem::path>& frame_dirs,
    const HarnessConfig& cfg, int jobs, std::vector<std::string>& errors) {
  std::vector<double> scales(frame_dirs.size(), 0.0);
  std::vector<uint8_t> ok(frame_dirs.size(), 0);
  parallel_frames(frame_dirs.size(), jobs, [&](size_t f) {
    try {
      FrameInputs in = load_frame_inputs(frame_dirs[f], cfg.space);
      FloatMap radar_depth = project_points(in.radar, in.K);
      if (!in.mask.empty())
        radar_depth = apply_mask(radar_depth, in.mask, in.K.width,
                                 in.K.height);
      Correspondences corr = build_correspondences(in.mono, radar_depth);
      scales[f] = fit_var(corr, cfg.space).scale;
      ok[f] = 1;
    } catch (const std::exception& e) {
      if (errors[f].empty()) errors[f] = e.what();
    }
  });
  std::vector<double> usable;
  for (size_t f = 0; f < scales.size(); ++f)
    if (ok[f]) usable.push_back(scales[f]);
  return estimate_const(usable, cfg.space).scale;
}

struct FrameEval {
  std::string name;
  std::vector<MetricsReport> reports;
  std::string error;
};

inline FrameEval run_and_save_frame(const std::filesystem::path& frame_dir,
                                    const std::string& name,
                                    const HarnessConfig& cfg,
                                    uint64_t frame_seed,
                                    const RefinerParams* refiner,
                                    const std::filesystem::path* out_dir) {
  FrameEval ev;
  ev.name = name;
  try {
    FrameInputs in = load_frame_inputs(frame_dir, cfg.space);
    ConfidenceStack file_stack;
    const ConfidenceStack* stack = nullptr;
    if (cfg.confidence == ConfidenceMode::Files) {
      file_stack = read_confidence_stack(frame_dir / "conf", in.radar,
                                         in.K.width, in.K.height);
      stack = &file_stack;
    }
    FrameResult res = run_frame(in, cfg, frame_seed, stack, refiner);

    if (out_dir != nullptr) {
      std::filesystem::path dir = *out_dir / name;
      std::filesystem::create_directories(dir);
      write_map_with_mask(dir, "d_ga", res.aligned.d_ga);
      write_map_with_mask(dir, "z_ga", res.aligned.z_ga);
      write_map_with_mask(dir, "dq", res.d_q);
      write_map_with_mask(dir, "sq", res.s_q);
      write_map_with_mask(dir, "inv_sq", res.inv_s_q);
      write_map_with_mask(dir, "r", res.residual);
      write_map_with_mask(dir, "dhat", res.composed.d_hat);
    }

    const FloatMap& target =
        cfg.eval_target == EvalTarget::Gt ? in.gt : in.d_int;
    ev.reports = evaluate_ranges(res.composed.d_hat, target, cfg.range_caps);
  } catch (const std::exception& e) {
    ev.error = e.what();
  }
  return ev;
}

}  // namespace detail

// Full pipeline over a dataset. Writes stage maps per frame and metrics.csv;
// in compare mode, runs every alignment method and writes ga_compare.csv
// plus per-method metrics files instead of stage maps.
inline int cmd_run(const std::filesystem::path& config_path,
                   const std::filesystem::path& data_dir,
                   const std::filesystem::path& out_dir,
                   const RunOptions& opt = {}) {
  HarnessConfig cfg = read_harness_config(config_path);
  detail::apply_run_overrides(cfg, opt);

  std::vector<std::string> names = read_index(data_dir / "index.txt");
  if (names.empty())
    throw Error(ErrorCode::EmptyInput, "dataset index lists no frames");
  std::vector<std::filesystem::path> frame_dirs;
  for (const std::string& n : names) frame_dirs.push_back(data_dir / n);

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec)
    throw Error(ErrorCode::IoError,
                out_dir.string() + ": cannot create output directory");

  RefinerParams refiner;
  bool have_refiner = false;
  if (cfg.residual == ResidualMode::Checkpoint) {
    refiner = read_checkpoint(cfg.checkpoint);
    have_refiner = true;
  }

  const std::string target_name =
      cfg.eval_target == EvalTarget::Gt ? "gt" : "dint";
  bool any_failed = false;

  auto run_pass = [&](const HarnessConfig& pass_cfg,
                      const std::filesystem::path* maps_out)
      -> std::vector<detail::FrameEval> {
    std::vector<detail::FrameEval> evals(names.size());
    detail::parallel_frames(names.size(), opt.jobs, [&](size_t f) {
      uint64_t frame_seed = StreamRng::derive_key(pass_cfg.seed, f);
      evals[f] = detail::run_and_save_frame(
          frame_dirs[f], names[f], pass_cfg, frame_seed,
          have_refiner ? &refiner : nullptr, maps_out);
    });
    return evals;
  };

  auto collect_rows = [&](const std::vector<detail::FrameEval>& evals) {
    std::vector<MetricsRow> rows;
    for (const detail::FrameEval& ev : evals) {
      if (!ev.error.empty()) {
        std::cerr << "frame " << ev.name << " failed: " << ev.error << "\n";
        any_failed = true;
        continue;
      }
      for (const MetricsReport& r : ev.reports)
        rows.push_back(MetricsRow{ev.name, target_name, r});
    }
    return rows;
  };

  if (!cfg.ga_compare) {
    if (cfg.ga == GaMethod::Const && !cfg.const_scale) {
      std::vector<std::string> prepass_errors(names.size());
      cfg.const_scale =
          detail::const_scale_prepass(frame_dirs, cfg, opt.jobs,
                                      prepass_errors);
    }
    std::vector<detail::FrameEval> evals = run_pass(cfg, &out_dir);
    write_metrics_csv(out_dir / "metrics.csv", collect_rows(evals));
    return any_failed ? kExitFrameFailures : kExitOk;
  }

  // Compare mode: same frames under every alignment option.
  static constexpr GaMethod kMethods[] = {GaMethod::Const, GaMethod::Var,
                                          GaMethod::Ls, GaMethod::Ransac};
  static constexpr const char* kMethodNames[] = {"const", "var", "ls",
                                                 "ransac"};
  std::ofstream compare(out_dir / "ga_compare.csv");
  if (!compare)
    detail::io_fail((out_dir / "ga_compare.csv").string(), "cannot open");
  compare << "method,range_cap_m,frames,n_pixels,mae_mm,rmse_mm,imae_per_km,"
             "irmse_per_km,absrel,sqrel_mm,delta1\n";
  for (int mi = 0; mi < 4; ++mi) {
    HarnessConfig mcfg = cfg;
    mcfg.ga_compare = false;
    mcfg.ga = kMethods[mi];
    if (mcfg.ga == GaMethod::Const && !mcfg.const_scale) {
      std::vector<std::string> prepass_errors(names.size());
      mcfg.const_scale = detail::const_scale_prepass(
          frame_dirs, mcfg, opt.jobs, prepass_errors);
    }
    std::vector<detail::FrameEval> evals = run_pass(mcfg, nullptr);
    std::vector<MetricsRow> rows = collect_rows(evals);
    write_metrics_csv(out_dir / ("metrics_" + std::string(kMethodNames[mi]) +
                                 ".csv"),
                      rows);
    for (double cap : cfg.range_caps) {
      KahanSum mae, rmse, imae, irmse, absrel, sqrel, delta1;
      size_t n_frames = 0, n_pixels = 0;
      for (const MetricsRow& r : rows) {
        if (r.report.range_cap_m != cap) continue;
        mae.add(r.report.mae_mm);
        rmse.add(r.report.rmse_mm);
        imae.add(r.report.imae_per_km);
        irmse.add(r.report.irmse_per_km);
        absrel.add(r.report.absrel);
        sqrel.add(r.report.sqrel_mm);
        delta1.add(r.report.delta1);
        n_pixels += r.report.n_pixels;
        ++n_frames;
      }
      if (n_frames == 0) continue;
      double inv = 1.0 / static_cast<double>(n_frames);
      compare << kMethodNames[mi] << "," << detail::format_f64(cap) << ","
              << n_frames << "," << n_pixels << ","
              << detail::format_f64(mae.value() * inv) << ","
              << detail::format_f64(rmse.value() * inv) << ","
              << detail::format_f64(imae.value() * inv) << ","
              << detail::format_f64(irmse.value() * inv) << ","
              << detail::format_f64(absrel.value() * inv) << ","
              << detail::format_f64(sqrel.value() * inv) << ","
              << detail::format_f64(delta1.value() * inv) << "\n";
    }
  }
  if (!compare)
    detail::io_fail((out_dir / "ga_compare.csv").string(), "write failed");
  return any_failed ? kExitFrameFailures : kExitOk;
}

struct TrainOptions {
  std::optional<uint64_t> seed;
  int jobs = 1;
};

// Prepare (z_ga, 1/s_q, sparse gt, dint) per frame, train the residual
// refiner, write the checkpoint and per-iteration loss history.
inline int cmd_train_sml(const std::filesystem::path& config_path,
                         const std::filesystem::path& data_dir,
                         const std::filesystem::path& checkpoint_out,
                         const TrainOptions& opt = {}) {
  HarnessConfig cfg = read_harness_config(config_path);
  if (opt.seed) cfg.seed = *opt.seed;

  std::vector<std::string> names = read_index(data_dir / "index.txt");
  if (names.empty())
    throw Error(ErrorCode::EmptyInput, "dataset index lists no frames");

  if (cfg.ga == GaMethod::Const && !cfg.const_scale) {
    std::vector<std::filesystem::path> frame_dirs;
    for (const std::string& n : names) frame_dirs.push_back(data_dir / n);
    std::vector<std::string> prepass_errors(names.size());
    cfg.const_scale = detail::const_scale_prepass(frame_dirs, cfg, opt.jobs,
                                                  prepass_errors);
  }

  std::vector<RefineFrame> batch(names.size());
  std::vector<std::string> errors(names.size());
  detail::parallel_frames(names.size(), opt.jobs, [&](size_t f) {
    try {
      std::filesystem::path dir = data_dir / names[f];
      FrameInputs in = load_frame_inputs(dir, cfg.space);
      ConfidenceStack file_stack;
      const ConfidenceStack* stack = nullptr;
      if (cfg.confidence == ConfidenceMode::Files) {
        file_stack = read_confidence_stack(dir / "conf", in.radar, in.K.width,
                                           in.K.height);
        stack = &file_stack;
      }
      uint64_t frame_seed = StreamRng::derive_key(cfg.seed, f);
      HarnessConfig stage_cfg = cfg;
      stage_cfg.residual = ResidualMode::Zero;
      FrameResult res = run_frame(in, stage_cfg, frame_seed, stack);

      PointCloud lidar = read_cloud_csv(dir / "lidar.csv");
      FloatMap d_gt = project_points(lidar, in.K);
      if (!in.mask.empty())
        d_gt = apply_mask(d_gt, in.mask, in.K.width, in.K.height);

      batch[f] = RefineFrame{std::move(res.aligned.z_ga),
                             std::move(res.inv_s_q), std::move(d_gt),
                             std::move(in.d_int)};
    } catch (const std::exception& e) {
      errors[f] = e.what();
    }
  });
  for (size_t f = 0; f < errors.size(); ++f) {
    if (!errors[f].empty())
      throw Error(ErrorCode::IoError,
                  "frame " + names[f] + ": " + errors[f]);
  }

  TrainConfig tc;
  tc.learning_rate = cfg.learning_rate;
  tc.iterations = cfg.iterations;
  tc.lambda_gt = cfg.lambda_gt;
  tc.beta = cfg.beta;
  tc.seed = cfg.seed;
  tc.momentum = cfg.momentum;
  tc.guarded = cfg.guarded;

  RefinerParams init = RefinerParams::seeded(cfg.seed, cfg.init_gain);
  std::filesystem::path history_path = checkpoint_out;
  history_path += ".history.csv";
  try {
    TrainResult res = train_refiner(init, batch, tc);
    write_checkpoint(checkpoint_out, res.params);
    write_loss_history_csv(history_path, res.history);
    if (res.history.size() >= 2 && res.history.front() > 0.0) {
      std::cout << "final/initial loss ratio: "
                << res.history.back() / res.history.front() << "\n";
    }
  } catch (const DivergenceError& e) {
    write_loss_history_csv(history_path, e.partial().history);
    std::cerr << e.what() << " (partial history written)\n";
    return kExitDivergence;
  }
  return kExitOk;
}

struct EvalOptions {
  std::vector<double> range_caps = {50.0, 70.0, 80.0};
  std::optional<std::filesystem::path> csv_out;
};

inline int cmd_eval(const std::filesystem::path& d_hat_path,
                    const std::filesystem::path& gt_path,
                    const EvalOptions& opt = {}) {
  FloatMap d_hat = read_map_auto(d_hat_path, MapKind::Depth);
  FloatMap gt = read_map_auto(gt_path, MapKind::Depth);
  std::vector<MetricsReport> reports =
      evaluate_ranges(d_hat, gt, opt.range_caps);
  std::vector<MetricsRow> rows;
  for (const MetricsReport& r : reports) {
    std::printf(
        "cap=%gm n=%zu mae=%.3fmm rmse=%.3fmm imae=%.3f/km irmse=%.3f/km "
        "absrel=%.5f sqrel=%.3fmm delta1=%.5f\n",
        r.range_cap_m, r.n_pixels, r.mae_mm, r.rmse_mm, r.imae_per_km,
        r.irmse_per_km, r.absrel, r.sqrel_mm, r.delta1);
    rows.push_back(MetricsRow{d_hat_path.filename().string(),
                              gt_path.filename().string(), r});
  }
  if (opt.csv_out) write_metrics_csv(*opt.csv_out, rows);
  return kExitOk;
}

// Fixed color ramp for absolute error: t = min(|d - gt| / emax, 1),
// rgb = (255 t, 255 (1 - |2t - 1|), 255 (1 - t)), rounded; invalid black.
inline int cmd_render(const std::filesystem::path& map_path,
                      const std::filesystem::path& gt_path,
                      const std::filesystem::path& out_path,
                      double emax = 5.0) {
  FloatMap m = read_map_auto(map_path, MapKind::Depth);
  FloatMap gt = read_map_auto(gt_path, MapKind::Depth);
  require_same_shape(m, gt, "render");
  if (!(emax > 0.0))
    throw Error(ErrorCode::UsageError, "emax must be positive");
  std::vector<uint8_t> rgb(m.size() * 3, 0);
  for (size_t i = 0; i < m.size(); ++i) {
    if (!m.valid[i] || !gt.valid[i]) continue;
    double t = std::min(std::abs(m.values[i] - gt.values[i]) / emax, 1.0);
    rgb[i * 3 + 0] = static_cast<uint8_t>(std::lround(255.0 * t));
    rgb[i * 3 + 1] =
        static_cast<uint8_t>(std::lround(255.0 * (1.0 - std::abs(2.0 * t - 1.0))));
    rgb[i * 3 + 2] = static_cast<uint8_t>(std::lround(255.0 * (1.0 - t)));
  }
  write_ppm(out_path, rgb, m.width, m.height);
  return kExitOk;
}

}  // namespace rcdepth
