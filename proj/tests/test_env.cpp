#include <gtest/gtest.h>

#include <cmath>

#include "phrl/env.hpp"

using namespace phrl;

namespace {

EnvConfig proprio_only_config(uint64_t seed = 0) {
  EnvConfig cfg;
  cfg.modalities = {false, false, true};
  cfg.seed = seed;
  return cfg;
}

Vec3 home_tip(const EnvConfig& cfg) {
  return forward_kinematics(cfg.arm, cfg.home_joints).position;
}

Pose centered_block(const EnvConfig& cfg, double dx = 0.0, double dy = 0.0,
                    double yaw = 0.0) {
  const Vec3 tip = home_tip(cfg);
  return Pose::PlanarYaw(tip.x() + dx, tip.y() + dy,
                         cfg.geometry.block_extents.z() / 2.0, yaw);
}

}  // namespace

TEST(Reward, PinnedComponentCases) {
  RewardCoeffs c;
  const RewardBreakdown idle = compute_reward(0.25, 0.25, false, false, c);
  EXPECT_EQ(idle.distance, 0.0);
  EXPECT_EQ(idle.success, 0.0);
  EXPECT_EQ(idle.collision, 0.0);
  EXPECT_EQ(idle.time, -0.01);
  EXPECT_EQ(idle.total, -0.01);

  const RewardBreakdown closer = compute_reward(0.100, 0.090, false, false, c);
  EXPECT_NEAR(closer.distance, 1.0, 1e-12);   // 10 mm at 100/m

  const RewardBreakdown both = compute_reward(0.02, 0.002, true, true, c);
  EXPECT_EQ(both.success, 10.0);
  EXPECT_EQ(both.collision, -1.0);
  EXPECT_EQ(both.total, both.distance + both.success + both.collision + both.time);
}

TEST(Reward, TotalIsExactComponentSumOn10kRandomSteps) {
  RewardCoeffs c;
  Rng rng(99);
  for (int i = 0; i < 10000; ++i) {
    const double prev = rng.uniform(0.0, 0.6);
    const double now = rng.uniform(0.0, 0.6);
    const bool col = rng.bernoulli(0.3);
    const bool suc = rng.bernoulli(0.1);
    const RewardBreakdown r = compute_reward(prev, now, col, suc, c);
    ASSERT_EQ(r.total, r.distance + r.success + r.collision + r.time);
    ASSERT_LE(r.collision, 0.0);
    ASSERT_LT(r.time, 0.0);
    ASSERT_TRUE(r.success == 0.0 || r.success == c.r_success);
  }
}

TEST(Reward, DeltaShapingIsAntisymmetric) {
  RewardCoeffs c;
  const double toward = compute_reward(0.30, 0.28, false, false, c).distance;
  const double away = compute_reward(0.30, 0.32, false, false, c).distance;
  EXPECT_GT(toward, 0.0);
  EXPECT_LT(away, 0.0);
  EXPECT_NEAR(toward, -away, 1e-9);
}

TEST(EnvConfig, ValidationRejectsBadSettings) {
  EnvConfig bad;
  bad.success_threshold = 0.005;   // >= 4 mm diametral clearance
  EXPECT_THROW(bad.validate(), ConfigError);

  bad = EnvConfig{};
  bad.modalities = {false, false, false};
  EXPECT_THROW(bad.validate(), ConfigError);

  bad = EnvConfig{};
  bad.intrinsics.width = bad.intrinsics.height = 100;   // not obs_size * 2^k
  EXPECT_THROW(bad.validate(), ConfigError);

  bad = EnvConfig{};
  bad.max_steps = 0;
  EXPECT_THROW(bad.validate(), ConfigError);

  EXPECT_NO_THROW(EnvConfig{}.validate());
}

TEST(EnvReset, DeterministicGivenSeed) {
  const EnvConfig cfg = proprio_only_config(42);
  Env a(cfg), b(cfg);
  const Observation oa = a.reset();
  const Observation ob = b.reset();
  EXPECT_TRUE(oa == ob);
  EXPECT_TRUE(a.state().block_pose.position.isApprox(b.state().block_pose.position));
  EXPECT_EQ(a.state().block_color, b.state().block_color);
  EXPECT_EQ(a.state().peg_color, b.state().peg_color);

  // Consecutive episodes draw fresh randomization (the proprio-only
  // observation itself is pose-independent, so compare the state).
  const Vec3 first = a.state().block_pose.position;
  a.reset();
  EXPECT_FALSE(a.state().block_pose.position.isApprox(first));
}

TEST(EnvReset, DegenerateRegionCollapsesPlacement) {
  EnvConfig cfg = proprio_only_config(7);
  cfg.table_region = {-0.45, -0.45, -0.10, -0.10};
  Env env(cfg);
  for (int i = 0; i < 5; ++i) {
    env.reset();
    EXPECT_NEAR(env.state().block_pose.position.x(), -0.45, 1e-12);
    EXPECT_NEAR(env.state().block_pose.position.y(), -0.10, 1e-12);
  }
}

TEST(EnvReset, PositionsUniformOverRegionChiSquared) {
  const EnvConfig cfg = proprio_only_config(2024);
  Env env(cfg);
  const int nx = 4, ny = 4, n = 1000;
  int counts[16] = {};
  for (int i = 0; i < n; ++i) {
    env.reset();
    const auto& p = env.state().block_pose.position;
    const double fx = (p.x() - cfg.table_region.x_lo) /
                      (cfg.table_region.x_hi - cfg.table_region.x_lo);
    const double fy = (p.y() - cfg.table_region.y_lo) /
                      (cfg.table_region.y_hi - cfg.table_region.y_lo);
    const int bx = std::min(nx - 1, int(fx * nx));
    const int by = std::min(ny - 1, int(fy * ny));
    ++counts[by * nx + bx];
  }
  const double expected = double(n) / (nx * ny);
  double chi2 = 0.0;
  for (int c : counts) chi2 += (c - expected) * (c - expected) / expected;
  // df = 15, critical value at the 1% level.
  EXPECT_LT(chi2, 30.578);
}

TEST(EnvReset, WholeRegionVisibleFromHome) {
  const EnvConfig cfg = proprio_only_config();
  Env env(cfg);
  for (double x : {cfg.table_region.x_lo, cfg.table_region.x_hi})
    for (double y : {cfg.table_region.y_lo, cfg.table_region.y_hi}) {
      const Pose corner =
          Pose::PlanarYaw(x, y, cfg.geometry.block_extents.z() / 2.0, 0.785);
      EXPECT_DOUBLE_EQ(env.visible_fraction(corner), 1.0) << x << "," << y;
    }
}

TEST(EnvReset, ImpossibleVisibilityThrows) {
  EnvConfig cfg = proprio_only_config(3);
  cfg.table_region = {1.5, 1.6, 1.5, 1.6};   // far outside the frustum
  Env env(cfg);
  EXPECT_THROW(env.reset(), UnreachableRandomizationError);
}

TEST(EnvStep, RequiresActiveEpisode) {
  Env env(proprio_only_config());
  EXPECT_THROW(env.step(Vec3::Zero()), EpisodeOverError);
}

TEST(EnvStep, ZeroActionYieldsPureTimePenalty) {
  Env env(proprio_only_config(5));
  env.reset(centered_block(env.config(), 0.05, 0.03));
  const StepResult r = env.step(Vec3::Zero());
  EXPECT_EQ(r.reward.distance, 0.0);
  EXPECT_EQ(r.reward.success, 0.0);
  EXPECT_EQ(r.reward.collision, 0.0);
  EXPECT_EQ(r.reward.total, -0.01);
  EXPECT_FALSE(r.terminated);
  EXPECT_FALSE(r.info.collided);
}

TEST(EnvStep, DescendingIntoBlockSideCollidesAndRollsBack) {
  Env env(proprio_only_config(6));
  // Hole axis 30 mm from the tip: descending tries to sink the peg into
  // the top face next to the hole.
  env.reset(centered_block(env.config(), 0.03, 0.0));
  bool collided = false;
  for (int i = 0; i < 100 && !env.done(); ++i) {
    const Joints before = env.state().joints;
    const StepResult r = env.step(Vec3(0, 0, -1));
    if (r.info.collided) {
      collided = true;
      EXPECT_EQ(r.reward.collision, -1.0);
      EXPECT_EQ(r.reward.distance, 0.0);   // rolled back, no progress term
      EXPECT_TRUE((env.state().joints - before).isZero(0.0));
      break;
    }
  }
  EXPECT_TRUE(collided);
  // The tip never ends up inside the block.
  const Vec3 tip = env.tip_pose().position;
  EXPECT_GE(tip.z(), env.config().geometry.block_extents.z() - 1e-9);
}

TEST(EnvStep, ScriptedStraightLineInsertionSucceeds) {
  Env env(proprio_only_config(8));
  env.reset(centered_block(env.config(), 0.0, 0.0, 0.4));
  double script_return = 0.0;
  bool terminated = false;
  int steps = 0;
  while (!env.done()) {
    const Vec3 delta = env.target_world() - env.tip_pose().position;
    const Vec3 action =
        (delta / env.config().action_scale).cwiseMax(-1.0).cwiseMin(1.0);
    const StepResult r = env.step(action);
    script_return += r.reward.total;
    ++steps;
    if (r.terminated) {
      terminated = true;
      EXPECT_EQ(r.reward.success, 10.0);
      EXPECT_LE(r.info.distance, env.config().success_threshold);
    }
  }
  EXPECT_TRUE(terminated);
  EXPECT_LT(steps, 120);
  // Peg ends up actually inside the hole.
  const ContactReport contact = check_collision(
      env.config().geometry, env.tip_pose().position, env.state().block_pose);
  EXPECT_FALSE(contact.colliding);
  EXPECT_GT(contact.peg_inside_hole_depth, 0.005);

  // Zero-action policy from the same start earns strictly less.
  Env idle(proprio_only_config(8));
  idle.reset(centered_block(idle.config(), 0.0, 0.0, 0.4));
  double idle_return = 0.0;
  while (!idle.done()) idle_return += idle.step(Vec3::Zero()).reward.total;
  EXPECT_GT(script_return, idle_return);
}

TEST(EnvStep, TruncatesAtMaxSteps) {
  EnvConfig cfg = proprio_only_config(9);
  cfg.max_steps = 5;
  Env env(cfg);
  env.reset(centered_block(cfg, 0.05, 0.0));
  StepResult last;
  for (int i = 0; i < 5; ++i) last = env.step(Vec3(1, 0, 0));
  EXPECT_TRUE(last.truncated);
  EXPECT_FALSE(last.terminated);
  EXPECT_TRUE(env.done());
  EXPECT_THROW(env.step(Vec3::Zero()), EpisodeOverError);
}

TEST(Observation, ModalityMaskingShapes) {
  EnvConfig cfg;
  cfg.modalities = {true, true, true};
  Env env(cfg);
  Observation obs = env.reset(centered_block(cfg));
  ASSERT_TRUE(obs.image.has_value());
  EXPECT_EQ(obs.image->channels, 2);
  EXPECT_EQ(obs.image->width, 64);
  EXPECT_EQ(obs.image->height, 64);
  EXPECT_EQ(obs.proprio.size(), 9u);
  for (float v : obs.image->data) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 1.0f);
  }
  for (float v : obs.proprio) EXPECT_TRUE(std::isfinite(v));

  cfg.modalities = {true, false, false};
  Env gray_only(cfg);
  obs = gray_only.reset(centered_block(cfg));
  EXPECT_EQ(obs.image->channels, 1);
  EXPECT_TRUE(obs.proprio.empty());

  cfg.modalities = {false, false, true};
  cfg.proprio_hole_vec = true;
  Env blind(cfg);
  obs = blind.reset(centered_block(cfg));
  EXPECT_FALSE(obs.image.has_value());
  EXPECT_EQ(obs.proprio.size(), 12u);
  EXPECT_EQ(blind.proprio_dim(), 12);
}

TEST(Observation, PureWithoutAugmentation) {
  EnvConfig cfg;
  cfg.modalities = {true, true, true};
  Env env(cfg);
  env.reset(centered_block(cfg, 0.02, -0.01));
  Rng r1(111), r2(999);
  EXPECT_TRUE(env.make_observation(r1) == env.make_observation(r2));
}

TEST(Observation, AugmentationSeededAndActive) {
  EnvConfig cfg;
  cfg.modalities = {true, true, false};
  cfg.gray_aug = default_gray_spec();
  cfg.depth_aug = default_depth_spec();
  for (auto& op : cfg.gray_aug->ops) op.probability = 1.0;
  Env env(cfg);
  env.reset(centered_block(cfg, 0.02, -0.01));
  Rng a(5), b(5), c(6);
  const Observation o1 = env.make_observation(a);
  const Observation o2 = env.make_observation(b);
  const Observation o3 = env.make_observation(c);
  EXPECT_TRUE(o1 == o2);
  EXPECT_FALSE(o1 == o3);
  Rng clean_rng(1);
  EnvConfig plain = cfg;
  plain.gray_aug.reset();
  plain.depth_aug.reset();
  Env penv(plain);
  penv.reset(centered_block(plain, 0.02, -0.01));
  EXPECT_FALSE(o1 == penv.make_observation(clean_rng));
}

TEST(Observation, BlockVisibleInRenderedFrame) {
  EnvConfig cfg;
  cfg.modalities = {true, true, false};
  Env env(cfg);
  env.reset(centered_block(cfg, 0.08, -0.05, 0.6));
  RenderRequest req;
  req.intrinsics = cfg.intrinsics;
  req.camera_pose = env.camera_view();
  req.peg_tip = env.tip_pose().position;
  req.block_pose = env.state().block_pose;
  req.block_color = env.state().block_color;
  req.peg_color = env.state().peg_color;
  const RenderResult frame = render(cfg.geometry, req);
  int block_px = 0, border_block_px = 0;
  for (int y = 0; y < frame.object_id.height; ++y)
    for (int x = 0; x < frame.object_id.width; ++x) {
      if (frame.object_id.at(x, y) != uint8_t(ObjectId::Block)) continue;
      ++block_px;
      if (x == 0 || y == 0 || x == frame.object_id.width - 1 ||
          y == frame.object_id.height - 1)
        ++border_block_px;
    }
  EXPECT_GT(block_px, 200);          // block clearly in view
  EXPECT_EQ(border_block_px, 0);     // and fully inside the frame
}

TEST(EndToEnd, FullSeedDeterminismWithAugmentations) {
  EnvConfig cfg;
  cfg.modalities = {true, true, true};
  cfg.gray_aug = default_gray_spec();
  cfg.depth_aug = default_depth_spec();
  cfg.seed = 31337;
  Env a(cfg), b(cfg);
  Observation oa = a.reset();
  Observation ob = b.reset();
  ASSERT_TRUE(oa == ob);
  Rng actions(77);
  for (int i = 0; i < 20; ++i) {
    const Vec3 act(actions.uniform(-1, 1), actions.uniform(-1, 1), actions.uniform(-1, 1));
    const StepResult ra = a.step(act);
    const StepResult rb = b.step(act);
    ASSERT_EQ(ra.reward.total, rb.reward.total);
    ASSERT_TRUE(ra.observation == rb.observation);
    ASSERT_EQ(ra.terminated, rb.terminated);
    if (a.done()) break;
  }
}
