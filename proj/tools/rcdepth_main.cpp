// Command-line front end: gen / run / train-sml / eval / render.

#include <CLI11.hpp>
#include <iostream>
#include <string>
#include <vector>

#include "rcdepth/rcdepth.hpp"

namespace {

int exit_code_for(const rcdepth::Error& e) {
  switch (e.code()) {
    case rcdepth::ErrorCode::IoError:
      return rcdepth::kExitIo;
    case rcdepth::ErrorCode::DivergenceDetected:
      return rcdepth::kExitDivergence;
    default:
      return rcdepth::kExitUsage;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"radar-camera depth fusion pipeline"};
  app.require_subcommand(1);

  std::string spec_path, config_path, data_dir, out_dir, checkpoint_path;
  std::string map_path, gt_path, out_image, csv_out;
  std::string ga_override;
  uint64_t seed = 0;
  bool have_seed = false;
  double tau = 0.5;
  bool have_tau = false;
  std::vector<double> caps;
  int jobs = 1;
  double emax = 5.0;

  CLI::App* gen = app.add_subcommand("gen", "generate a synthetic dataset");
  gen->add_option("spec", spec_path, "scene spec file")->required();
  gen->add_option("out_dir", out_dir, "output dataset directory")->required();
  gen->add_option("--seed", seed, "override the spec seed")
      ->each([&](const std::string&) { have_seed = true; });
  gen->add_option("--jobs", jobs, "worker threads");

  CLI::App* run = app.add_subcommand("run", "run the fusion pipeline");
  run->add_option("config", config_path, "pipeline config file")->required();
  run->add_option("data_dir", data_dir, "dataset directory")->required();
  run->add_option("out_dir", out_dir, "output directory")->required();
  run->add_option("--seed", seed, "override the config seed")
      ->each([&](const std::string&) { have_seed = true; });
  run->add_option("--ga", ga_override, "const|var|ls|ransac|compare");
  run->add_option("--tau", tau, "confidence threshold")
      ->each([&](const std::string&) { have_tau = true; });
  run->add_option("--range-caps", caps, "evaluation range caps in meters");
  run->add_option("--jobs", jobs, "worker threads");

  CLI::App* train = app.add_subcommand("train-sml", "train the scale refiner");
  train->add_option("config", config_path, "pipeline + training config")
      ->required();
  train->add_option("data_dir", data_dir, "dataset directory")->required();
  train->add_option("checkpoint_out", checkpoint_path, "checkpoint path")
      ->required();
  train->add_option("--seed", seed, "override the config seed")
      ->each([&](const std::string&) { have_seed = true; });
  train->add_option("--jobs", jobs, "worker threads for frame preparation");

  CLI::App* eval = app.add_subcommand("eval", "evaluate a depth map");
  eval->add_option("d_hat", map_path, "estimated depth PFM")->required();
  eval->add_option("gt", gt_path, "reference depth PFM")->required();
  eval->add_option("--range-caps", caps, "range caps in meters");
  eval->add_option("--csv", csv_out, "also write a metrics CSV");

  CLI::App* render = app.add_subcommand("render", "render an error map");
  render->add_option("map", map_path, "depth PFM")->required();
  render->add_option("gt", gt_path, "reference depth PFM")->required();
  render->add_option("out_image", out_image, "output PPM")->required();
  render->add_option("--emax", emax, "error mapped to the top of the ramp");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return rcdepth::kExitUsage;
  }

  try {
    if (gen->parsed()) {
      rcdepth::GenOptions opt;
      if (have_seed) opt.seed = seed;
      opt.jobs = jobs;
      return rcdepth::cmd_gen(spec_path, out_dir, opt);
    }
    if (run->parsed()) {
      rcdepth::RunOptions opt;
      if (have_seed) opt.seed = seed;
      if (!ga_override.empty()) opt.ga = ga_override;
      if (have_tau) opt.tau = tau;
      if (!caps.empty()) opt.range_caps = caps;
      opt.jobs = jobs;
      return rcdepth::cmd_run(config_path, data_dir, out_dir, opt);
    }
    if (train->parsed()) {
      rcdepth::TrainOptions opt;
      if (have_seed) opt.seed = seed;
      opt.jobs = jobs;
      return rcdepth::cmd_train_sml(config_path, data_dir, checkpoint_path,
                                    opt);
    }
    if (eval->parsed()) {
      rcdepth::EvalOptions opt;
      if (!caps.empty()) opt.range_caps = caps;
      if (!csv_out.empty()) opt.csv_out = csv_out;
      return rcdepth::cmd_eval(map_path, gt_path, opt);
    }
    if (render->parsed()) {
      return rcdepth::cmd_render(map_path, gt_path, out_image, emax);
    }
  } catch (const rcdepth::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return rcdepth::kExitIo;
  }
  return rcdepth::kExitUsage;
}
