#pragma once

#include <optional>
#include <vector>

#include "phrl/arm.hpp"
#include "phrl/augment.hpp"
#include "phrl/camera.hpp"
#include "phrl/image.hpp"
#include "phrl/render.hpp"
#include "phrl/scene.hpp"

namespace phrl {

struct RewardCoeffs {
  double w_dist = 100.0;      // per meter of progress toward the target
  double r_success = 10.0;
  double r_collision = -1.0;
  double r_time = -0.01;
};

struct Modalities {
  bool rgb = true;
  bool depth = true;
  bool proprio = true;

  bool any_image() const { return rgb || depth; }
  bool any() const { return rgb || depth || proprio; }
  int image_channels() const { return int(rgb) + int(depth); }
};

struct HsvRange {
  double h_lo = 0, h_hi = 0;   // degrees, hi may exceed 360 to wrap reds
  double s_lo = 1, s_hi = 1;
  double v_lo = 1, v_hi = 1;

  Hsv sample(Rng& rng) const {
    return {rng.uniform(h_lo, h_hi), rng.uniform(s_lo, s_hi), rng.uniform(v_lo, v_hi)};
  }
};

struct TableRegion {
  double x_lo = -0.662, x_hi = -0.262;
  double y_lo = -0.253, y_hi = -0.013;
};

struct EnvConfig {
  SceneGeometry geometry;
  ArmModel arm = ArmModel::ur5e();
  CameraIntrinsics intrinsics;                  // render resolution (128)
  int obs_size = 64;                            // policy-input resolution
  Joints home_joints{(Joints() << 0.0, -1.60, 1.30, -1.271, -M_PI_2, 0.0).finished()};
  TableRegion table_region;
  HsvRange block_color_range{190, 250, 0.55, 0.95, 0.55, 0.95};
  HsvRange peg_color_range{340, 380, 0.55, 0.95, 0.55, 0.95};
  int max_steps = 200;
  double action_scale = 0.005;                  // m per unit action component
  double success_threshold = 0.003;
  double insertion_depth = 0.010;               // target below the rim
  RewardCoeffs reward;
  Modalities modalities;
  std::optional<AugSpec> gray_aug;
  std::optional<AugSpec> depth_aug;
  bool sensor_depth_noise = false;              // stereo-noise model on observations
  bool proprio_hole_vec = false;                // append tip-to-target vector
  double min_visible_fraction = 0.25;           // of the block top face at reset
  uint64_t seed = 0;

  void validate() const {
    geometry.validate();
    intrinsics.validate();
    if (max_steps <= 0) throw ConfigError("max_steps must be positive");
    if (!(action_scale > 0)) throw ConfigError("action_scale must be positive");
    if (!(success_threshold < geometry.clearance()))
      throw ConfigError("success_threshold must be below the hole clearance");
    if (!modalities.any()) throw ConfigError("at least one modality required");
    if (!(table_region.x_lo <= table_region.x_hi && table_region.y_lo <= table_region.y_hi))
      throw ConfigError("table region ranges must be ordered");
    int w = intrinsics.width;
    while (w > obs_size && w % 2 == 0) w /= 2;
    if (w != obs_size || intrinsics.width != intrinsics.height)
      throw ConfigError("render resolution must be obs_size times a power of two, square");
    if (gray_aug && gray_aug->channel != AugChannel::Gray)
      throw ConfigError("gray_aug must be a gray-channel spec");
    if (depth_aug && depth_aug->channel != AugChannel::Depth)
      throw ConfigError("depth_aug must be a depth-channel spec");
    check_joint_limits(arm, home_joints);
  }
};

/// Channel-major (CHW) float image in [0, 1]; channel order gray, depth.
struct ObsImage {
  int width = 0, height = 0, channels = 0;
  std::vector<float> data;

  ObsImage() = default;
  ObsImage(int w, int h, int c) : width(w), height(h), channels(c), data(size_t(w) * h * c) {}
  float& at(int c, int x, int y) { return data[(size_t(c) * height + y) * width + x]; }
  float at(int c, int x, int y) const { return data[(size_t(c) * height + y) * width + x]; }
  bool operator==(const ObsImage&) const = default;
};

struct Observation {
  std::optional<ObsImage> image;
  std::vector<float> proprio;

  bool operator==(const Observation&) const = default;
};

struct RewardBreakdown {
  double distance = 0.0;
  double success = 0.0;
  double collision = 0.0;
  double time = 0.0;
  double total = 0.0;
};

struct StepInfo {
  Eigen::Vector2d xy_error{0, 0};
  double distance = 0.0;
  bool collided = false;
};

struct StepResult {
  Observation observation;
  RewardBreakdown reward;
  bool terminated = false;
  bool truncated = false;
  StepInfo info;
};

inline RewardBreakdown compute_reward(double prev_distance, double distance,
                                      bool collided, bool succeeded,
                                      const RewardCoeffs& c) {
  RewardBreakdown r;
  r.distance = c.w_dist * (prev_distance - distance);
  r.success = succeeded ? c.r_success : 0.0;
  r.collision = collided ? c.r_collision : 0.0;
  r.time = c.r_time;
  r.total = r.distance + r.success + r.collision + r.time;
  return r;
}

class Env {
 public:
  explicit Env(EnvConfig cfg)
      : cfg_(std::move(cfg)),
        rng_(mix_seed(cfg_.seed, 0)),
        obs_rng_(mix_seed(cfg_.seed, 1)) {
    cfg_.validate();
    step_params_.max_step = cfg_.action_scale * std::sqrt(3.0) + 1e-12;
  }

  const EnvConfig& config() const { return cfg_; }
  const SceneState& state() const { return state_; }
  bool done() const { return done_; }
  int steps() const { return steps_; }

  Pose tip_pose() const { return forward_kinematics(cfg_.arm, state_.joints); }
  Pose camera_view() const { return camera_pose(cfg_.arm, state_.joints); }
  double distance() const { return prev_distance_; }
  Vec3 target_world() const {
    return state_.block_pose.apply(
        Vec3(0, 0, cfg_.geometry.block_extents.z() / 2.0 - cfg_.insertion_depth));
  }

  /// Fraction of the block's top face (sampled on a grid) that projects
  /// inside the camera frustum from the home configuration.
  double visible_fraction(const Pose& block_pose) const {
    const Pose cam = camera_pose(cfg_.arm, cfg_.home_joints);
    const Pose cam_inv = cam.inverse();
    const double hx = cfg_.geometry.block_extents.x() / 2.0;
    const double hy = cfg_.geometry.block_extents.y() / 2.0;
    const double top = cfg_.geometry.block_extents.z() / 2.0;
    const int n = 10;
    int inside = 0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const Vec3 p_b(-hx + (2.0 * hx) * (i + 0.5) / n,
                       -hy + (2.0 * hy) * (j + 0.5) / n, top);
        const Vec3 p_c = cam_inv.apply(block_pose.apply(p_b));
        if (p_c.z() <= 0.0) continue;
        const double u = cfg_.intrinsics.fx * p_c.x() / p_c.z() + cfg_.intrinsics.cx;
        const double v = cfg_.intrinsics.fy * p_c.y() / p_c.z() + cfg_.intrinsics.cy;
        if (u >= 0 && u < cfg_.intrinsics.width && v >= 0 && v < cfg_.intrinsics.height)
          ++inside;
      }
    return double(inside) / (n * n);
  }

  /// Domain-randomized episode start.
  Observation reset() {
    Pose block;
    bool placed = false;
    for (int attempt = 0; attempt < 100; ++attempt) {
      const double x = rng_.uniform(cfg_.table_region.x_lo, cfg_.table_region.x_hi);
      const double y = rng_.uniform(cfg_.table_region.y_lo, cfg_.table_region.y_hi);
      const double yaw = rng_.uniform(-M_PI, M_PI);
      block = Pose::PlanarYaw(x, y, cfg_.geometry.block_extents.z() / 2.0, yaw);
      if (visible_fraction(block) >= cfg_.min_visible_fraction) {
        placed = true;
        break;
      }
    }
    if (!placed)
      throw UnreachableRandomizationError(
          "no block placement met the visibility constraint in 100 tries");
    return reset(block);
  }

  /// Episode start at a pinned block pose (evaluation protocol).
  Observation reset(const Pose& block_pose) {
    state_ = SceneState{};
    state_.joints = cfg_.home_joints;
    state_.block_pose = block_pose;
    state_.block_color = hsv_to_rgb(cfg_.block_color_range.sample(rng_));
    state_.peg_color = hsv_to_rgb(cfg_.peg_color_range.sample(rng_));
    steps_ = 0;
    done_ = false;
    prev_distance_ = current_error().distance;
    return make_observation(obs_rng_);
  }

  StepResult step(const Vec3& action) {
    if (done_) throw EpisodeOverError("episode finished; call reset()");
    const Vec3 a = action.cwiseMax(-1.0).cwiseMin(1.0);
    const Vec3 delta = cfg_.action_scale * a;

    const Joints dq =
        resolve_cartesian_step(cfg_.arm, state_.joints, delta, step_params_);
    const Joints candidate = state_.joints + dq;
    const Vec3 tip_after = forward_kinematics(cfg_.arm, candidate).position;

    const ContactReport contact =
        check_collision(cfg_.geometry, tip_after, state_.block_pose);
    if (!contact.colliding) state_.joints = candidate;  // else roll back
    state_.in_collision = contact.colliding;

    const TargetErrorResult err = current_error();
    const bool succeeded = err.distance <= cfg_.success_threshold;
    ++steps_;
    state_.time_step = steps_;

    StepResult res;
    res.reward = compute_reward(prev_distance_, err.distance, contact.colliding,
                                succeeded, cfg_.reward);
    prev_distance_ = err.distance;
    res.terminated = succeeded;
    res.truncated = steps_ >= cfg_.max_steps;
    done_ = res.terminated || res.truncated;
    res.info = {err.xy_error, err.distance, contact.colliding};
    res.observation = make_observation(obs_rng_);
    return res;
  }

  /// Renders + assembles the observation for the current state. Consumes
  /// rng only when augmentation or sensor noise is configured.
  Observation make_observation(Rng& rng) const {
    Observation obs;
    if (cfg_.modalities.any_image()) {
      RenderRequest req;
      req.intrinsics = cfg_.intrinsics;
      req.camera_pose = camera_view();
      req.peg_tip = tip_pose().position;
      req.block_pose = state_.block_pose;
      req.block_color = state_.block_color;
      req.peg_color = state_.peg_color;
      const RenderResult frame = render(cfg_.geometry, req);

      GrayImage gray;
      DepthImage depth;
      if (cfg_.modalities.rgb) {
        gray = to_grayscale(frame.rgb);
        if (cfg_.gray_aug) gray = apply_pipeline(gray, *cfg_.gray_aug, rng);
      }
      if (cfg_.modalities.depth) {
        depth = frame.depth;
        if (cfg_.sensor_depth_noise) {
          DepthNoiseParams p;
          p.depth_min = cfg_.intrinsics.depth_min;
          p.depth_max = cfg_.intrinsics.depth_max;
          apply_depth_noise(depth, rng, p);
        }
        if (cfg_.depth_aug)
          depth = apply_pipeline(depth, *cfg_.depth_aug, rng, cfg_.intrinsics.depth_max);
      }
      while (cfg_.modalities.rgb && gray.width > cfg_.obs_size) gray = downsample2(gray);
      while (cfg_.modalities.depth && depth.width > cfg_.obs_size) depth = downsample2(depth);

      ObsImage img(cfg_.obs_size, cfg_.obs_size, cfg_.modalities.image_channels());
      int c = 0;
      if (cfg_.modalities.rgb) {
        for (int y = 0; y < img.height; ++y)
          for (int x = 0; x < img.width; ++x)
            img.at(c, x, y) = gray.at(x, y) / 255.0f;
        ++c;
      }
      if (cfg_.modalities.depth) {
        for (int y = 0; y < img.height; ++y)
          for (int x = 0; x < img.width; ++x)
            img.at(c, x, y) = depth.at(x, y) / float(cfg_.intrinsics.depth_max);
      }
      obs.image = std::move(img);
    }
    if (cfg_.modalities.proprio) {
      const Pose tip = tip_pose();
      for (int i = 0; i < 6; ++i)
        obs.proprio.push_back(
            float(state_.joints[i] / cfg_.arm.joint_limits[i].hi));
      for (int i = 0; i < 3; ++i) obs.proprio.push_back(float(tip.position[i]));
      if (cfg_.proprio_hole_vec) {
        const Vec3 v = target_world() - tip.position;
        for (int i = 0; i < 3; ++i) obs.proprio.push_back(float(v[i]));
      }
    }
    return obs;
  }

  int proprio_dim() const {
    if (!cfg_.modalities.proprio) return 0;
    return 9 + (cfg_.proprio_hole_vec ? 3 : 0);
  }

 private:
  TargetErrorResult current_error() const {
    return target_error(cfg_.geometry, tip_pose().position, state_.block_pose,
                        cfg_.insertion_depth);
  }

  EnvConfig cfg_;
  Rng rng_;        // placement + color stream
  Rng obs_rng_;    // augmentation / sensor-noise stream
  SceneState state_;
  CartesianStepParams step_params_;
  double prev_distance_ = 0.0;
  bool done_ = true;
  int steps_ = 0;
};

}  // namespace phrl
