// Command-line front end: training runs, protocol evaluations, experiment
// presets, and augmentation / renderer previews.
#include <CLI11.hpp>
#include <filesystem>
#include <iostream>

#include "phrl/harness.hpp"
#include "phrl/io.hpp"

namespace {

int cmd_train(const std::string& config_path, long seed_override) {
  phrl::ExperimentConfig cfg = config_path.empty()
                                   ? phrl::ExperimentConfig{}
                                   : phrl::parse_config(config_path);
  if (seed_override >= 0) phrl::apply_seed(cfg, uint64_t(seed_override));
  cfg.out_dir = phrl::resolve_out_root(cfg.out_dir);
  const phrl::TrainResult r = phrl::train(cfg, &std::cout);
  std::cout << "trained " << r.steps_run << " steps in " << r.wall_seconds
            << " s\ncurve:      " << r.curve_path
            << "\ncheckpoint: " << r.checkpoint_path << "\n";
  return 0;
}

int cmd_eval(const std::string& checkpoint, bool baseline,
             const std::string& protocol_path, int rollouts, uint64_t seed,
             const std::string& out_in) {
  const std::vector<phrl::EvalPose> protocol = protocol_path.empty()
                                                   ? phrl::default_protocol()
                                                   : phrl::parse_protocol(protocol_path);
  phrl::EvalReport report;
  std::string label;
  if (baseline) {
    phrl::BaselinePolicy policy;
    report = phrl::evaluate(policy, protocol, phrl::EnvConfig{}, rollouts, seed);
    label = "baseline";
  } else {
    report = phrl::evaluate_checkpoint(checkpoint, protocol, rollouts, seed);
    label = std::filesystem::path(checkpoint).stem().string();
  }
  const std::string out = phrl::resolve_out_root(out_in);
  std::filesystem::create_directories(out);
  phrl::write_eval_csv(out + "/" + label + "_episodes.csv", report);
  const std::string table = phrl::render_report(report);
  std::ofstream(out + "/" + label + "_report.txt") << table;
  std::cout << table;
  return 0;
}

int cmd_augment_preview(const std::string& in_path, const std::string& spec_path,
                        uint64_t seed, const std::string& out_in) {
  const phrl::AugSpec spec = spec_path.empty()
                                 ? phrl::default_gray_spec()
                                 : phrl::parse_aug_spec(spec_path);
  const std::string out = phrl::resolve_out_root(out_in);
  std::filesystem::create_directories(out);
  const std::string stem = std::filesystem::path(in_path).stem().string();
  phrl::Rng rng(seed);
  if (spec.channel == phrl::AugChannel::Gray) {
    phrl::GrayImage img;
    if (in_path.size() > 4 && in_path.substr(in_path.size() - 4) == ".ppm")
      img = phrl::to_grayscale(phrl::read_ppm(in_path));
    else
      img = phrl::read_pgm8(in_path);
    const std::string dst = out + "/" + stem + "_aug.pgm";
    phrl::write_pgm8(dst, phrl::apply_pipeline(img, spec, rng));
    std::cout << dst << "\n";
  } else {
    const phrl::DepthImage img = phrl::read_pgm16(in_path);
    const phrl::CameraIntrinsics intr;
    const std::string dst = out + "/" + stem + "_aug.pgm";
    phrl::write_pgm16(dst, phrl::apply_pipeline(img, spec, rng, intr.depth_max));
    std::cout << dst << "\n";
  }
  return 0;
}

int cmd_render_preview(const std::string& pose_file, const std::string& out_in) {
  std::ifstream in(pose_file);
  if (!in) throw phrl::IoError("cannot open pose file '" + pose_file + "'");
  const std::string out = phrl::resolve_out_root(out_in);
  std::filesystem::create_directories(out);
  const phrl::EnvConfig cfg;
  std::string line;
  int idx = 0;
  while (std::getline(in, line)) {
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    double x, y, yaw = 0;
    if (!(ls >> x >> y)) continue;
    ls >> yaw;
    phrl::Env env(cfg);
    env.reset(phrl::Pose::PlanarYaw(x, y, cfg.geometry.block_extents.z() / 2, yaw));
    phrl::RenderRequest req;
    req.intrinsics = cfg.intrinsics;
    req.camera_pose = env.camera_view();
    req.peg_tip = env.tip_pose().position;
    req.block_pose = env.state().block_pose;
    req.block_color = env.state().block_color;
    req.peg_color = env.state().peg_color;
    const phrl::RenderResult frame = phrl::render(cfg.geometry, req);
    const std::string stem = out + "/pose" + std::to_string(idx);
    phrl::write_ppm(stem + "_rgb.ppm", frame.rgb);
    phrl::write_pgm16(stem + "_depth.pgm", frame.depth);
    phrl::write_pgm8(stem + "_gray.pgm", phrl::to_grayscale(frame.rgb));
    std::cout << stem << "_{rgb.ppm,depth.pgm,gray.pgm}\n";
    ++idx;
  }
  if (idx == 0) throw phrl::ConfigError("pose file holds no poses");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"peg-in-hole insertion simulator and RL harness"};
  app.require_subcommand(1);

  std::string config_path, checkpoint, protocol_path, spec_path, in_path, pose_file;
  std::string preset_name, out_dir = "out";
  long seed_override = -1;
  uint64_t seed = 0;
  int rollouts = 5;
  bool baseline = false;

  CLI::App* train = app.add_subcommand("train", "train an agent from a config file");
  train->add_option("--config", config_path, "experiment config path");
  train->add_option("--seed", seed_override, "override the experiment seed");

  CLI::App* eval = app.add_subcommand("eval", "run the 6-pose evaluation protocol");
  auto* ck = eval->add_option("--checkpoint", checkpoint, "trained agent checkpoint");
  auto* bl = eval->add_flag("--baseline", baseline, "evaluate the visual-servo baseline");
  ck->excludes(bl);
  eval->add_option("--protocol", protocol_path, "protocol file (x y yaw per line)");
  eval->add_option("--rollouts", rollouts, "rollouts per pose");
  eval->add_option("--seed", seed, "evaluation seed");
  eval->add_option("--out", out_dir, "output directory");

  CLI::App* preset = app.add_subcommand("preset", "run a named experiment bundle");
  preset
      ->add_option("name", preset_name,
                   "one of: lowdim, image, algo-compare, ablation, tableI")
      ->required();
  preset->add_option("--out", out_dir, "output root");
  preset->add_option("--seed", seed, "training seed")->default_val(1);

  CLI::App* aug = app.add_subcommand("augment-preview", "apply a pipeline to an image");
  aug->add_option("--in", in_path, "input image (.ppm/.pgm)")->required();
  aug->add_option("--spec", spec_path, "pipeline spec file");
  aug->add_option("--seed", seed, "sampling seed");
  aug->add_option("--out", out_dir, "output directory")->default_val(".");

  CLI::App* rp = app.add_subcommand("render-preview", "render camera views of poses");
  rp->add_option("--pose-file", pose_file, "poses, one 'x y yaw' per line")->required();
  rp->add_option("--out", out_dir, "output directory")->default_val("render_out");

  CLI11_PARSE(app, argc, argv);
  try {
    if (train->parsed()) return cmd_train(config_path, seed_override);
    if (eval->parsed()) {
      if (!baseline && checkpoint.empty())
        throw phrl::ConfigError("eval needs --checkpoint PATH or --baseline");
      return cmd_eval(checkpoint, baseline, protocol_path, rollouts, seed, out_dir);
    }
    if (preset->parsed()) {
      phrl::run_preset(preset_name, out_dir, seed, &std::cout);
      return 0;
    }
    if (aug->parsed()) return cmd_augment_preview(in_path, spec_path, seed, out_dir);
    if (rp->parsed()) return cmd_render_preview(pose_file, out_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
