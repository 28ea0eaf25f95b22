#pragma once

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "phrl/agents.hpp"
#include "phrl/baseline.hpp"
#include "phrl/checkpoint.hpp"
#include "phrl/config.hpp"
#include "phrl/env.hpp"
#include "phrl/replay.hpp"

namespace phrl {

// ---------------------------------------------------------------------------
// Evaluation protocol: six block poses, five rollouts each.

struct EvalPose {
  double x = 0, y = 0, yaw = 0;
};

/// 3x2 grid spanning exactly 0.39 m in x and 0.21 m in y, with assorted yaws.
inline std::vector<EvalPose> default_protocol() {
  const double xs[3] = {-0.657, -0.462, -0.267};
  const double ys[2] = {-0.2385, -0.0285};
  const double yaws[6] = {0.0, 0.7, -0.4, 1.2, -0.9, 0.3};
  std::vector<EvalPose> p;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 2; ++j) p.push_back({xs[i], ys[j], yaws[2 * i + j]});
  return p;
}

inline void validate_protocol(const std::vector<EvalPose>& poses) {
  if (poses.size() != 6)
    throw ConfigError("protocol must define exactly 6 poses, got " +
                      std::to_string(poses.size()));
  double x_lo = poses[0].x, x_hi = poses[0].x, y_lo = poses[0].y, y_hi = poses[0].y;
  for (const EvalPose& p : poses) {
    x_lo = std::min(x_lo, p.x);
    x_hi = std::max(x_hi, p.x);
    y_lo = std::min(y_lo, p.y);
    y_hi = std::max(y_hi, p.y);
  }
  if (x_hi - x_lo > 0.39 + 1e-9 || y_hi - y_lo > 0.21 + 1e-9)
    throw ConfigError("protocol poses exceed the 0.39 m x 0.21 m span");
}

/// One pose per line: "x y yaw"; '#' comments and blank lines allowed.
inline std::vector<EvalPose> parse_protocol(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open protocol file '" + path + "'");
  std::vector<EvalPose> poses;
  std::string line;
  while (std::getline(in, line)) {
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    EvalPose p;
    if (ls >> p.x >> p.y) {
      ls >> p.yaw;  // optional, defaults to 0
      poses.push_back(p);
    }
  }
  validate_protocol(poses);
  return poses;
}

inline Pose protocol_block_pose(const EvalPose& p, const SceneGeometry& geo) {
  return Pose::PlanarYaw(p.x, p.y, geo.block_extents.z() / 2.0, p.yaw);
}

// ---------------------------------------------------------------------------
// Policies: a single adapter surface over agents, the visual-servo baseline,
// and scripted references.

struct Policy {
  virtual ~Policy() = default;
  virtual void begin_episode() {}
  virtual Vec3 act(const Env& env, const Observation& obs) = 0;
};

/// Deterministic (no exploration noise) wrapper over a trained agent.
class AgentPolicy : public Policy {
 public:
  explicit AgentPolicy(Agent& agent) : agent_(agent) {}
  Vec3 act(const Env&, const Observation& obs) override {
    return agent_.act(obs, /*explore=*/false, rng_).cast<double>();
  }

 private:
  Agent& agent_;
  Rng rng_{0};  // deterministic action path never draws from it
};

class BaselinePolicy : public Policy {
 public:
  explicit BaselinePolicy(BaselineParams params = {}) : ctrl_(params) {}
  void begin_episode() override { ctrl_.reset(); }
  Vec3 act(const Env& env, const Observation&) override { return ctrl_.act(env); }

 private:
  BaselineController ctrl_;
};

/// Oracle that steers straight from ground-truth state: hover over the hole
/// axis, then descend.  Upper reference for the evaluation machinery.
class ScriptedPolicy : public Policy {
 public:
  Vec3 act(const Env& env, const Observation&) override {
    const Vec3 tip = env.tip_pose().position;
    const Vec3 target = env.target_world();
    const double block_top = target.z() + env.config().insertion_depth;
    Vec3 goal = target;
    if ((target - tip).head<2>().norm() > 1e-3) goal.z() = block_top + 0.02;
    const Vec3 a = (goal - tip) / env.config().action_scale;
    return a.cwiseMax(-1.0).cwiseMin(1.0);
  }
};

class ZeroPolicy : public Policy {
 public:
  Vec3 act(const Env&, const Observation&) override { return Vec3::Zero(); }
};

class RandomPolicy : public Policy {
 public:
  explicit RandomPolicy(uint64_t seed) : seed_(seed), rng_(seed) {}
  void begin_episode() override { rng_ = Rng(mix_seed(seed_, ++episode_)); }
  Vec3 act(const Env&, const Observation&) override {
    return Vec3(rng_.uniform(-1, 1), rng_.uniform(-1, 1), rng_.uniform(-1, 1));
  }

 private:
  uint64_t seed_;
  uint64_t episode_ = 0;
  Rng rng_;
};

// ---------------------------------------------------------------------------
// Episode rollout and reports.

struct EpisodeRecord {
  int pose = -1;  ///< protocol pose index, -1 for randomized resets
  int rollout = 0;
  double x_error_mm = 0, y_error_mm = 0;  ///< signed, block frame, episode end
  bool inserted = false;
  double episode_return = 0;
  int steps = 0;
};

inline EpisodeRecord run_episode(Env& env, Policy& policy,
                                 const std::optional<Pose>& block_pose) {
  EpisodeRecord rec;
  Observation obs = block_pose ? env.reset(*block_pose) : env.reset();
  policy.begin_episode();
  StepResult res;
  do {
    res = env.step(policy.act(env, obs));
    obs = res.observation;
    rec.episode_return += res.reward.total;
    ++rec.steps;
  } while (!res.terminated && !res.truncated);
  rec.inserted = res.terminated;
  rec.x_error_mm = res.info.xy_error.x() * 1000.0;
  rec.y_error_mm = res.info.xy_error.y() * 1000.0;
  return rec;
}

struct PoseStats {
  int pose = 0;
  double mean_x_mm = 0, std_x_mm = 0;
  double mean_y_mm = 0, std_y_mm = 0;
  double insertion_rate_pct = 0;
  int n = 0;
};

struct EvalReport {
  std::vector<EpisodeRecord> episodes;
  std::vector<PoseStats> per_pose;
  int n_rollouts = 0;
  double mean_x_mm = 0, std_x_mm = 0;
  double mean_y_mm = 0, std_y_mm = 0;
  double insertion_rate_pct = 0;
  double mean_return = 0;

  static EvalReport from_episodes(std::vector<EpisodeRecord> eps) {
    EvalReport r;
    r.episodes = std::move(eps);
    r.n_rollouts = int(r.episodes.size());
    auto stats = [](const std::vector<const EpisodeRecord*>& g, PoseStats& s) {
      s.n = int(g.size());
      if (g.empty()) return;
      double sx = 0, sy = 0;
      int ins = 0;
      for (const EpisodeRecord* e : g) {
        sx += e->x_error_mm;
        sy += e->y_error_mm;
        ins += e->inserted;
      }
      s.mean_x_mm = sx / s.n;
      s.mean_y_mm = sy / s.n;
      s.insertion_rate_pct = 100.0 * ins / s.n;
      if (s.n > 1) {
        double vx = 0, vy = 0;
        for (const EpisodeRecord* e : g) {
          vx += (e->x_error_mm - s.mean_x_mm) * (e->x_error_mm - s.mean_x_mm);
          vy += (e->y_error_mm - s.mean_y_mm) * (e->y_error_mm - s.mean_y_mm);
        }
        s.std_x_mm = std::sqrt(vx / (s.n - 1));
        s.std_y_mm = std::sqrt(vy / (s.n - 1));
      }
    };
    std::vector<const EpisodeRecord*> all;
    std::map<int, std::vector<const EpisodeRecord*>> groups;
    for (const EpisodeRecord& e : r.episodes) {
      all.push_back(&e);
      groups[e.pose].push_back(&e);
      r.mean_return += e.episode_return;
    }
    if (r.n_rollouts) r.mean_return /= r.n_rollouts;
    PoseStats agg;
    stats(all, agg);
    r.mean_x_mm = agg.mean_x_mm;
    r.std_x_mm = agg.std_x_mm;
    r.mean_y_mm = agg.mean_y_mm;
    r.std_y_mm = agg.std_y_mm;
    r.insertion_rate_pct = agg.insertion_rate_pct;
    for (auto& [pose, g] : groups) {
      PoseStats s;
      s.pose = pose;
      stats(g, s);
      r.per_pose.push_back(s);
    }
    return r;
  }
};

inline void write_eval_csv(const std::string& path, const EvalReport& report) {
  using config_detail::fmt_double;
  std::ofstream f(path);
  if (!f) throw IoError("cannot write '" + path + "'");
  f << "pose,rollout,x_error_mm,y_error_mm,inserted,episode_return,steps\n";
  for (const EpisodeRecord& e : report.episodes)
    f << e.pose << "," << e.rollout << "," << fmt_double(e.x_error_mm) << ","
      << fmt_double(e.y_error_mm) << "," << int(e.inserted) << ","
      << fmt_double(e.episode_return) << "," << e.steps << "\n";
}

inline std::vector<EpisodeRecord> read_eval_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open '" + path + "'");
  std::vector<EpisodeRecord> eps;
  std::string line;
  std::getline(f, line);  // header
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    EpisodeRecord e;
    char c;
    int ins;
    ls >> e.pose >> c >> e.rollout >> c >> e.x_error_mm >> c >> e.y_error_mm >>
        c >> ins >> c >> e.episode_return >> c >> e.steps;
    if (!ls) throw IoError("malformed row in '" + path + "': " + line);
    e.inserted = ins != 0;
    eps.push_back(e);
  }
  return eps;
}

/// Fixed-protocol evaluation: rollouts_per_pose episodes at each of the six
/// poses.  Per-episode environments are freshly seeded, so repeated calls are
/// identical and the policy is the only state that can differ.
inline EvalReport evaluate(Policy& policy, const std::vector<EvalPose>& protocol,
                           const EnvConfig& base, int rollouts_per_pose = 5,
                           uint64_t seed = 0) {
  validate_protocol(protocol);
  std::vector<EpisodeRecord> eps;
  for (size_t i = 0; i < protocol.size(); ++i) {
    const Pose block = protocol_block_pose(protocol[i], base.geometry);
    for (int r = 0; r < rollouts_per_pose; ++r) {
      EnvConfig ec = base;
      ec.seed = mix_seed(seed, i * 1000 + uint64_t(r));
      Env env(ec);
      EpisodeRecord rec = run_episode(env, policy, block);
      rec.pose = int(i);
      rec.rollout = r;
      eps.push_back(rec);
    }
  }
  return EvalReport::from_episodes(std::move(eps));
}

inline std::string render_report(const EvalReport& r) {
  using config_detail::fmt_double;
  std::ostringstream os;
  auto fx = [](double v) {
    char b[32];
    std::snprintf(b, sizeof b, "%6.2f", v);
    return std::string(b);
  };
  os << "pose   x error (mm)      y error (mm)      insertion\n";
  for (const PoseStats& p : r.per_pose) {
    os << "  " << (p.pose < 0 ? std::string("*") : std::to_string(p.pose))
       << "   " << fx(p.mean_x_mm) << " ± " << fx(p.std_x_mm) << "  "
       << fx(p.mean_y_mm) << " ± " << fx(p.std_y_mm) << "   "
       << fx(p.insertion_rate_pct) << " %\n";
  }
  os << "  all " << fx(r.mean_x_mm) << " ± " << fx(r.std_x_mm) << "  "
     << fx(r.mean_y_mm) << " ± " << fx(r.std_y_mm) << "   "
     << fx(r.insertion_rate_pct) << " %   (" << r.n_rollouts << " rollouts)\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// Curve logging.

struct CurvePoint {
  long step = 0;
  double mean_return = 0;
  double success_rate = 0;  ///< fraction in [0,1]
};

inline std::vector<CurvePoint> read_curve(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open '" + path + "'");
  std::vector<CurvePoint> curve;
  std::string line;
  std::getline(f, line);  // header
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    CurvePoint p;
    char c;
    ls >> p.step >> c >> p.mean_return >> c >> p.success_rate;
    if (!ls) throw IoError("malformed row in '" + path + "': " + line);
    curve.push_back(p);
  }
  return curve;
}

// ---------------------------------------------------------------------------
// Training.

inline ObsShapes obs_shapes(const EnvConfig& cfg) {
  ObsShapes s;
  s.channels = cfg.modalities.image_channels();
  s.height = s.width = s.channels > 0 ? cfg.obs_size : 0;
  s.proprio = cfg.modalities.proprio ? 9 + (cfg.proprio_hole_vec ? 3 : 0) : 0;
  return s;
}

/// PHRL_OUT redirects all artifact roots when set.
inline std::string resolve_out_root(const std::string& fallback) {
  if (const char* e = std::getenv("PHRL_OUT"); e && *e) return e;
  return fallback;
}

struct TrainResult {
  std::string out_dir;
  std::string curve_path;
  std::string checkpoint_path;
  std::vector<CurvePoint> curve;
  long steps_run = 0;
  double wall_seconds = 0;
};

/// Deterministic mean-return / success-rate probe on randomized resets.
/// Environment seeds are fixed per rollout index, so successive probes during
/// one run (and across reruns of the same config) see identical episodes.
inline CurvePoint probe_policy(Policy& policy, const EnvConfig& base, int rollouts,
                               uint64_t seed, long step) {
  CurvePoint p;
  p.step = step;
  for (int k = 0; k < rollouts; ++k) {
    EnvConfig ec = base;
    ec.seed = mix_seed(seed, uint64_t(k));
    Env env(ec);
    const EpisodeRecord rec = run_episode(env, policy, std::nullopt);
    p.mean_return += rec.episode_return;
    p.success_rate += rec.inserted;
  }
  if (rollouts) {
    p.mean_return /= rollouts;
    p.success_rate /= rollouts;
  }
  return p;
}

/// Off-policy training: uniform-random warmup, then explore/update.  Appends
/// a deterministic-eval row to curve.csv at step 0, every eval_every steps
/// past warmup, and at the final step; writes checkpoint.phrl and the fully
/// resolved config.txt beside it.
inline TrainResult train(const ExperimentConfig& cfg, std::ostream* log = nullptr) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();

  TrainResult out;
  out.out_dir = cfg.out_dir;
  std::filesystem::create_directories(out.out_dir);
  out.curve_path = out.out_dir + "/curve.csv";
  out.checkpoint_path = out.out_dir + "/checkpoint.phrl";
  {
    std::ofstream f(out.out_dir + "/config.txt");
    f << serialize_config(cfg);
  }

  Env env(cfg.env);
  Agent agent(cfg.agent, obs_shapes(cfg.env));
  ReplayBuffer replay(size_t(cfg.replay_capacity));
  Rng rollout_rng(mix_seed(cfg.seed, 33));
  const uint64_t eval_seed = mix_seed(cfg.seed, 55);

  std::ofstream curve(out.curve_path);
  if (!curve) throw IoError("cannot write '" + out.curve_path + "'");
  curve << "step,mean_return,success_rate\n";
  AgentPolicy eval_policy(agent);
  const auto add_row = [&](long step) {
    CurvePoint p = probe_policy(eval_policy, cfg.env, cfg.rollouts_per_eval,
                                eval_seed, step);
    using config_detail::fmt_double;
    curve << p.step << "," << fmt_double(p.mean_return) << ","
          << fmt_double(p.success_rate) << "\n";
    curve.flush();
    if (log)
      *log << "step " << p.step << "  return " << p.mean_return << "  success "
           << p.success_rate << std::endl;
    out.curve.push_back(p);
    return p;
  };

  add_row(0);
  Observation obs = env.reset();
  bool stopped = false;
  long step = 0;
  while (step < cfg.total_steps && !stopped) {
    ++step;
    Eigen::Vector3f a;
    if (step <= cfg.agent.warmup_steps)
      a = Eigen::Vector3f(float(rollout_rng.uniform(-1, 1)),
                          float(rollout_rng.uniform(-1, 1)),
                          float(rollout_rng.uniform(-1, 1)));
    else
      a = agent.act(obs, /*explore=*/true, rollout_rng);

    const StepResult res = env.step(a.cast<double>());
    replay.push(Transition{std::move(obs),
                           {a.x(), a.y(), a.z()},
                           float(res.reward.total),
                           res.observation,
                           res.terminated});
    obs = (res.terminated || res.truncated) ? env.reset() : res.observation;

    if (step > cfg.agent.warmup_steps) {
      if (step % cfg.update_every == 0)
        agent.update(replay.sample<float>(cfg.agent.batch, rollout_rng));
      if (step % cfg.eval_every == 0) {
        const CurvePoint p = add_row(step);
        if (p.success_rate >= cfg.early_stop_success) stopped = true;
      }
    }
  }
  if (step > cfg.agent.warmup_steps && out.curve.back().step != step) add_row(step);

  save_checkpoint(out.checkpoint_path, agent);
  out.steps_run = step;
  out.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  {
    using config_detail::fmt_double;
    std::ofstream f(out.out_dir + "/train_stats.txt");
    f << "steps_run = " << out.steps_run << "\n"
      << "wall_seconds = " << fmt_double(out.wall_seconds) << "\n";
  }
  return out;
}

/// Reuse a finished run if its directory holds the same resolved config plus
/// curve and checkpoint; otherwise train now.  Long presets stay restartable
/// and repeated acceptance runs stay cheap.
inline TrainResult train_cached(const ExperimentConfig& cfg, std::ostream* log = nullptr) {
  const std::string dir = cfg.out_dir;
  const std::string cfg_path = dir + "/config.txt";
  const std::string curve_path = dir + "/curve.csv";
  const std::string ckpt_path = dir + "/checkpoint.phrl";
  const std::string stats_path = dir + "/train_stats.txt";
  if (std::filesystem::exists(cfg_path) && std::filesystem::exists(curve_path) &&
      std::filesystem::exists(ckpt_path) && std::filesystem::exists(stats_path)) {
    std::ifstream f(cfg_path);
    std::ostringstream ss;
    ss << f.rdbuf();
    if (ss.str() == serialize_config(cfg)) {
      TrainResult out;
      out.out_dir = dir;
      out.curve_path = curve_path;
      out.checkpoint_path = ckpt_path;
      out.curve = read_curve(curve_path);
      std::ifstream sf(stats_path);
      std::string key, eq;
      while (sf >> key >> eq) {
        if (key == "steps_run") sf >> out.steps_run;
        else if (key == "wall_seconds") sf >> out.wall_seconds;
      }
      if (log) *log << "reusing finished run in " << dir << std::endl;
      return out;
    }
  }
  return train(cfg, log);
}

// ---------------------------------------------------------------------------
// Presets.

/// Proprioception + relative hole vector, no images.
inline ExperimentConfig preset_lowdim(uint64_t seed) {
  ExperimentConfig c;
  c.preset = "lowdim";
  c.env.modalities.rgb = false;
  c.env.modalities.depth = false;
  c.env.proprio_hole_vec = true;
  c.agent.net.conv.clear();
  c.agent.net.trunk = {128, 128};
  c.agent.batch = 64;
  c.agent.warmup_steps = 1000;
  c.total_steps = 50000;
  c.eval_every = 2500;
  c.rollouts_per_eval = 20;
  c.replay_capacity = 50000;
  c.early_stop_success = 0.95;
  apply_seed(c, seed);
  return c;
}

/// 64x64 grayscale with the full augmentation pipeline + proprioception
/// (no hole vector: the image must carry the hole location).
inline ExperimentConfig preset_image(uint64_t seed) {
  ExperimentConfig c;
  c.preset = "image";
  c.env.modalities.rgb = true;
  c.env.modalities.depth = false;
  c.env.obs_size = 64;
  c.env.gray_aug = default_gray_spec();
  c.agent.net.conv = {{8, 3, 2}, {16, 3, 2}, {16, 3, 2}};
  c.agent.net.trunk = {128, 128};
  c.agent.batch = 64;
  c.agent.warmup_steps = 2000;
  c.total_steps = 200000;
  c.eval_every = 5000;
  c.rollouts_per_eval = 10;
  c.update_every = 4;
  c.replay_capacity = 25000;
  c.early_stop_success = 0.5;
  apply_seed(c, seed);
  return c;
}

inline void scale_render(EnvConfig& env, int render, int obs) {
  const double s = double(render) / env.intrinsics.width;
  env.intrinsics.fx *= s;
  env.intrinsics.fy *= s;
  env.intrinsics.cx *= s;
  env.intrinsics.cy *= s;
  env.intrinsics.width = env.intrinsics.height = render;
  env.obs_size = obs;
}

/// Shrink the block-randomization region about its center.
inline void scale_region(EnvConfig& env, double factor) {
  TableRegion& t = env.table_region;
  const double cx = (t.x_lo + t.x_hi) / 2, cy = (t.y_lo + t.y_hi) / 2;
  const double hx = (t.x_hi - t.x_lo) / 2 * factor, hy = (t.y_hi - t.y_lo) / 2 * factor;
  t = {cx - hx, cx + hx, cy - hy, cy + hy};
}

struct AblationCell {
  std::string name;
  bool depth = false, augs = false, proprio = false;
};

inline std::vector<AblationCell> ablation_grid() {
  std::vector<AblationCell> cells;
  for (bool depth : {false, true})
    for (bool augs : {false, true})
      for (bool proprio : {false, true}) {
        AblationCell c;
        c.name = std::string(depth ? "rgbd" : "rgb") + (augs ? "_augs" : "_noaugs") +
                 (proprio ? "_proprio" : "_noproprio");
        c.depth = depth;
        c.augs = augs;
        c.proprio = proprio;
        cells.push_back(c);
      }
  return cells;
}

/// Modality/augmentation grid member at desk-scale budget: 32x32 observations
/// and a tightened randomization region keep each cell trainable in minutes.
inline ExperimentConfig preset_ablation_cell(const AblationCell& cell, uint64_t seed) {
  ExperimentConfig c;
  c.preset = "ablation";
  c.env.modalities.rgb = true;
  c.env.modalities.depth = cell.depth;
  c.env.modalities.proprio = cell.proprio;
  scale_render(c.env, 64, 32);
  scale_region(c.env, 0.35);
  if (cell.augs) {
    c.env.gray_aug = default_gray_spec();
    if (cell.depth) c.env.depth_aug = default_depth_spec();
  }
  c.agent.net.conv = {{8, 3, 2}, {16, 3, 2}, {16, 3, 2}};
  c.agent.net.trunk = {128, 128};
  c.agent.batch = 64;
  c.agent.warmup_steps = 2000;
  c.total_steps = 60000;
  c.eval_every = 4000;
  c.rollouts_per_eval = 10;
  c.update_every = 2;
  c.replay_capacity = 20000;
  c.early_stop_success = 0.6;
  apply_seed(c, seed);
  return c;
}

struct AlgoCompareResult {
  std::map<std::string, std::vector<CurvePoint>> mean_curves;  // seed-averaged
  std::map<std::string, double> final_mean_return;
  double random_return = 0;
  std::string out_dir;
};

/// Train td3/ddpg/sac on the low-dim preset with the same seeds (hence the
/// same env streams) and emit per-algorithm seed-averaged curves plus an
/// overlay file.  Early stopping is off so every curve shares one step grid.
inline AlgoCompareResult run_algo_compare(const std::string& root,
                                          const std::vector<uint64_t>& seeds = {1, 2, 3},
                                          std::ostream* log = nullptr) {
  AlgoCompareResult out;
  out.out_dir = root;
  std::filesystem::create_directories(root);
  const char* algos[3] = {"td3", "ddpg", "sac"};
  for (const char* name : algos) {
    std::vector<std::vector<CurvePoint>> curves;
    for (uint64_t seed : seeds) {
      ExperimentConfig c = preset_lowdim(seed);
      c.preset = "algo-compare";
      c.agent.algorithm = config_detail::algo_from(name);
      c.early_stop_success = 2.0;  // full length, shared step grid
      c.out_dir = root + "/" + name + "-s" + std::to_string(seed);
      if (log) *log << "== " << c.out_dir << std::endl;
      curves.push_back(train_cached(c, log).curve);
    }
    std::vector<CurvePoint> mean = curves[0];
    for (size_t i = 1; i < curves.size(); ++i) {
      if (curves[i].size() != mean.size())
        throw Error("algo-compare curves have mismatched step grids");
      for (size_t k = 0; k < mean.size(); ++k) {
        mean[k].mean_return += curves[i][k].mean_return;
        mean[k].success_rate += curves[i][k].success_rate;
      }
    }
    for (CurvePoint& p : mean) {
      p.mean_return /= double(curves.size());
      p.success_rate /= double(curves.size());
    }
    using config_detail::fmt_double;
    std::ofstream f(root + "/" + name + ".csv");
    f << "step,mean_return,success_rate\n";
    for (const CurvePoint& p : mean)
      f << p.step << "," << fmt_double(p.mean_return) << ","
        << fmt_double(p.success_rate) << "\n";
    out.final_mean_return[name] = mean.back().mean_return;
    out.mean_curves[name] = std::move(mean);
  }

  // Shared-grid overlay for plotting.
  {
    std::ofstream f(root + "/overlay.csv");
    f << "step,td3,ddpg,sac\n";
    const auto& td3 = out.mean_curves["td3"];
    using config_detail::fmt_double;
    for (size_t k = 0; k < td3.size(); ++k)
      f << td3[k].step << "," << fmt_double(td3[k].mean_return) << ","
        << fmt_double(out.mean_curves["ddpg"][k].mean_return) << ","
        << fmt_double(out.mean_curves["sac"][k].mean_return) << "\n";
  }

  // Random-policy reference under the same probe episodes.
  {
    const ExperimentConfig ref = preset_lowdim(seeds[0]);
    RandomPolicy rand_policy(999);
    out.random_return = probe_policy(rand_policy, ref.env, ref.rollouts_per_eval,
                                     mix_seed(ref.seed, 55), 0)
                            .mean_return;
    std::ofstream f(root + "/summary.txt");
    f << "final mean return (seed-averaged)\n";
    for (const char* name : algos)
      f << "  " << name << " = " << out.final_mean_return[name] << "\n";
    f << "  random = " << out.random_return << "\n";
  }
  return out;
}

struct AblationResult {
  std::map<std::string, std::vector<CurvePoint>> curves;
  std::map<std::string, double> final_success;
  std::string out_dir;
};

inline AblationResult run_ablation(const std::string& root, uint64_t seed = 1,
                                   std::ostream* log = nullptr) {
  AblationResult out;
  out.out_dir = root;
  std::filesystem::create_directories(root);
  std::ofstream summary(root + "/summary.csv");
  summary << "config,final_success\n";
  for (const AblationCell& cell : ablation_grid()) {
    ExperimentConfig c = preset_ablation_cell(cell, seed);
    c.out_dir = root + "/" + cell.name;
    if (log) *log << "== " << c.out_dir << std::endl;
    const TrainResult r = train_cached(c, log);
    out.curves[cell.name] = r.curve;
    out.final_success[cell.name] = r.curve.back().success_rate;
    summary << cell.name << ","
            << config_detail::fmt_double(r.curve.back().success_rate) << "\n";
    summary.flush();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Final report table.

struct TableRow {
  std::string label;
  EvalReport report;
};

inline std::string render_table(const std::vector<TableRow>& rows) {
  std::ostringstream os;
  size_t w = 8;
  for (const TableRow& r : rows) w = std::max(w, r.label.size());
  auto cell = [](double m, double s) {
    char b[48];
    std::snprintf(b, sizeof b, "%6.2f ± %-5.2f", m, s);
    return std::string(b);
  };
  os << std::string(w, ' ') << "   x error (mm)    y error (mm)    insertion (%)\n";
  for (const TableRow& r : rows) {
    os << r.label << std::string(w - r.label.size(), ' ') << "   "
       << cell(r.report.mean_x_mm, r.report.std_x_mm) << "  "
       << cell(r.report.mean_y_mm, r.report.std_y_mm) << "  ";
    char b[16];
    std::snprintf(b, sizeof b, "%8.1f", r.report.insertion_rate_pct);
    os << b << "\n";
  }
  return os.str();
}

inline void write_table_csv(const std::string& path, const std::vector<TableRow>& rows) {
  using config_detail::fmt_double;
  std::ofstream f(path);
  if (!f) throw IoError("cannot write '" + path + "'");
  f << "config,mean_x_mm,std_x_mm,mean_y_mm,std_y_mm,insertion_pct\n";
  for (const TableRow& r : rows)
    f << r.label << "," << fmt_double(r.report.mean_x_mm) << ","
      << fmt_double(r.report.std_x_mm) << "," << fmt_double(r.report.mean_y_mm)
      << "," << fmt_double(r.report.std_y_mm) << ","
      << fmt_double(r.report.insertion_rate_pct) << "\n";
}

/// Evaluate one checkpoint under the six-pose protocol using the env settings
/// recorded beside it at training time.
inline EvalReport evaluate_checkpoint(const std::string& ckpt_path,
                                      const std::vector<EvalPose>& protocol,
                                      int rollouts_per_pose = 5, uint64_t seed = 0) {
  Agent agent = load_checkpoint(ckpt_path);
  EnvConfig env;
  const std::string cfg_path =
      (std::filesystem::path(ckpt_path).parent_path() / "config.txt").string();
  if (std::filesystem::exists(cfg_path))
    env = parse_config(cfg_path).env;
  AgentPolicy policy(agent);
  return evaluate(policy, protocol, env, rollouts_per_pose, seed);
}

/// Six-pose, 30-rollout report for every trained run found under `search_root`
/// (any directory holding checkpoint.phrl) plus the classical baseline.
inline std::vector<TableRow> run_table(const std::string& search_root,
                                       const std::string& out_dir,
                                       std::ostream* log = nullptr) {
  std::filesystem::create_directories(out_dir);
  const std::vector<EvalPose> protocol = default_protocol();
  std::vector<TableRow> rows;

  std::vector<std::string> ckpts;
  if (std::filesystem::exists(search_root))
    for (const auto& entry :
         std::filesystem::recursive_directory_iterator(search_root))
      if (entry.is_regular_file() && entry.path().filename() == "checkpoint.phrl")
        ckpts.push_back(entry.path().string());
  std::sort(ckpts.begin(), ckpts.end());

  for (const std::string& ckpt : ckpts) {
    const std::string label =
        std::filesystem::path(ckpt).parent_path().filename().string();
    if (log) *log << "evaluating " << label << std::endl;
    TableRow row{label, evaluate_checkpoint(ckpt, protocol)};
    write_eval_csv(out_dir + "/" + label + ".csv", row.report);
    rows.push_back(std::move(row));
  }
  {
    if (log) *log << "evaluating baseline" << std::endl;
    BaselinePolicy policy;
    TableRow row{"baseline", evaluate(policy, protocol, EnvConfig{})};
    write_eval_csv(out_dir + "/baseline.csv", row.report);
    rows.push_back(std::move(row));
  }
  const std::string table = render_table(rows);
  std::ofstream f(out_dir + "/table.txt");
  f << table;
  write_table_csv(out_dir + "/table.csv", rows);
  if (log) *log << table;
  return rows;
}

/// Named experiment bundles behind the `preset` CLI verb.
inline void run_preset(const std::string& name, const std::string& root_in,
                       uint64_t seed = 1, std::ostream* log = nullptr) {
  const std::string root = resolve_out_root(root_in);
  if (name == "lowdim") {
    ExperimentConfig c = preset_lowdim(seed);
    c.out_dir = root + "/lowdim-s" + std::to_string(seed);
    train_cached(c, log);
  } else if (name == "image") {
    ExperimentConfig c = preset_image(seed);
    c.out_dir = root + "/image-s" + std::to_string(seed);
    train_cached(c, log);
  } else if (name == "algo-compare") {
    run_algo_compare(root + "/algo-compare", {1, 2, 3}, log);
  } else if (name == "ablation") {
    run_ablation(root + "/ablation", seed, log);
  } else if (name == "tableI") {
    run_table(root, root + "/tableI", log);
  } else {
    throw ConfigError("unknown preset '" + name + "'");
  }
}

}  // namespace phrl
