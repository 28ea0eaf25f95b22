#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "phrl/core.hpp"
#include "phrl/env.hpp"
#include "phrl/net.hpp"
#include "phrl/replay.hpp"

namespace phrl {

enum class Algo : uint8_t { Td3 = 0, Ddpg = 1, Sac = 2 };

inline std::string algo_name(Algo a) {
  switch (a) {
    case Algo::Td3: return "td3";
    case Algo::Ddpg: return "ddpg";
    case Algo::Sac: return "sac";
  }
  return "?";
}

inline Algo parse_algo(const std::string& s) {
  if (s == "td3") return Algo::Td3;
  if (s == "ddpg") return Algo::Ddpg;
  if (s == "sac") return Algo::Sac;
  throw ConfigError("unknown algorithm: " + s);
}

struct AgentConfig {
  Algo algorithm = Algo::Td3;
  double gamma = 0.99;
  double tau = 0.005;
  int batch = 128;
  double actor_lr = 3e-4;
  double critic_lr = 3e-4;
  double exploration_noise = 0.1;  // td3/ddpg behaviour noise sigma
  double policy_noise = 0.2;       // td3 target smoothing noise
  double noise_clip = 0.5;
  int policy_delay = 2;
  double entropy_target = -3.0;    // sac, defaults to -action_dim
  double init_temperature = 0.1;   // sac alpha at t=0
  double alpha_lr = 3e-4;
  int warmup_steps = 1000;
  uint64_t seed = 0;
  NetSpec net = NetSpec::defaults();

  void validate() const {
    if (!(gamma > 0.0 && gamma < 1.0) && gamma != 0.0)
      throw ConfigError("gamma must be in [0,1)");
    if (!(tau > 0.0 && tau <= 1.0)) throw ConfigError("tau must be in (0,1]");
    if (policy_delay < 1) throw ConfigError("policy_delay must be >= 1");
    if (batch < 1) throw ConfigError("batch must be positive");
  }
};

/// Input dimensions the agent was built for.
struct ObsShapes {
  int channels = 0, height = 0, width = 0;  // zero channels = no image
  int proprio = 0;
  int action = 3;

  bool has_image() const { return channels > 0; }
  int image_dim() const { return channels * height * width; }
};

struct Losses {
  double critic = 0.0;
  double actor = 0.0;
  bool actor_updated = false;
  double alpha = 0.0;      // sac temperature loss
  double alpha_value = 0.0;
  double q_mean = 0.0;
};

/// Off-policy actor-critic learner (TD3 / DDPG / SAC) over the shared
/// conv-encoder + MLP stack.  The encoder is trained by the critic loss only;
/// the actor consumes encoder features without backpropagating into them.
class Agent {
 public:
  Agent(const AgentConfig& cfg, const ObsShapes& shapes)
      : cfg_(cfg), shapes_(shapes), rng_(mix_seed(cfg.seed, 2)) {
    cfg_.validate();
    Rng init(mix_seed(cfg.seed, 1));
    if (shapes_.has_image())
      encoder_ = ConvNet<float>(shapes_.channels, shapes_.height, shapes_.width,
                                cfg_.net.conv, init);
    const int feat = feature_dim();
    const int a_out = cfg_.algorithm == Algo::Sac ? 2 * shapes_.action : shapes_.action;
    const Act a_act = cfg_.algorithm == Algo::Sac ? Act::None : Act::Tanh;
    actor_ = Mlp<float>(widths(feat, a_out), Act::Relu, a_act, init);
    critic1_ = Mlp<float>(widths(feat + shapes_.action, 1), Act::Relu, Act::None, init);
    if (twin_critics())
      critic2_ = Mlp<float>(widths(feat + shapes_.action, 1), Act::Relu, Act::None, init);

    encoder_t_ = encoder_;
    critic1_t_ = critic1_;
    critic2_t_ = critic2_;
    actor_t_ = actor_;

    log_alpha_ = float(std::log(cfg_.init_temperature));

    critic_opt_ = Adam<float>(critic_params(), cfg_.critic_lr);
    actor_opt_ = Adam<float>(actor_.params(), cfg_.actor_lr);
    std::vector<ParamRef<float>> ap = {{&log_alpha_, &g_log_alpha_, 1, {1}}};
    alpha_opt_ = Adam<float>(ap, cfg_.alpha_lr);
  }

  const AgentConfig& config() const { return cfg_; }
  const ObsShapes& shapes() const { return shapes_; }
  int64_t critic_updates() const { return critic_updates_; }
  int64_t actor_updates() const { return actor_updates_; }
  float alpha() const { return std::exp(log_alpha_); }
  void set_log_alpha(float v) { log_alpha_ = v; }

  bool twin_critics() const { return cfg_.algorithm != Algo::Ddpg; }

  /// Deterministic (or exploring) policy action in [-1,1]^3.
  Eigen::Vector3f act(const Observation& obs, bool explore, Rng& rng) {
    check_modality(obs);
    MatX<float> img, prop;
    obs_to_cols(obs, img, prop);
    MatX<float> feat = forward_features(img, prop, encoder_);
    MatX<float> out = actor_.forward(feat);
    Eigen::Vector3f a;
    if (cfg_.algorithm == Algo::Sac) {
      Eigen::Vector3f mean = out.topRows(shapes_.action).col(0);
      if (explore) {
        Eigen::Vector3f ls = out.bottomRows(shapes_.action).col(0);
        for (int i = 0; i < 3; ++i) {
          const float sd = std::exp(std::clamp(ls[i], kLogStdMin, kLogStdMax));
          a[i] = std::tanh(mean[i] + sd * float(rng.normal()));
        }
      } else {
        for (int i = 0; i < 3; ++i) a[i] = std::tanh(mean[i]);
      }
    } else {
      a = out.col(0);
      if (explore && cfg_.exploration_noise > 0.0)
        for (int i = 0; i < 3; ++i)
          a[i] += float(rng.normal(0.0, cfg_.exploration_noise));
      a = a.cwiseMax(-1.0f).cwiseMin(1.0f);
    }
    return a;
  }

  Losses update(const Batch<float>& batch) {
    switch (cfg_.algorithm) {
      case Algo::Td3: return update_td3(batch);
      case Algo::Ddpg: return update_ddpg(batch);
      case Algo::Sac: return update_sac(batch);
    }
    throw ConfigError("bad algorithm");
  }

  /// Bootstrap target values y for a batch, exactly as the chosen algorithm's
  /// critic regression uses them.
  VecX<float> critic_targets(const Batch<float>& batch) {
    switch (cfg_.algorithm) {
      case Algo::Td3: return targets_td3(batch);
      case Algo::Ddpg: return targets_ddpg(batch);
      case Algo::Sac: return targets_sac(batch);
    }
    throw ConfigError("bad algorithm");
  }

  Losses update_td3(const Batch<float>& batch) {
    VecX<float> y = targets_td3(batch);
    Losses out = critic_step(batch, y);
    ++critic_updates_;
    if (critic_updates_ % cfg_.policy_delay == 0) {
      out.actor = deterministic_actor_step(batch);
      out.actor_updated = true;
      ++actor_updates_;
    }
    polyak_all();
    return out;
  }

  Losses update_ddpg(const Batch<float>& batch) {
    VecX<float> y = targets_ddpg(batch);
    Losses out = critic_step(batch, y);
    ++critic_updates_;
    out.actor = deterministic_actor_step(batch);
    out.actor_updated = true;
    ++actor_updates_;
    polyak_all();
    return out;
  }

  Losses update_sac(const Batch<float>& batch) {
    VecX<float> y = targets_sac(batch);
    Losses out = critic_step(batch, y);
    ++critic_updates_;
    out = sac_actor_and_alpha_step(batch, out);
    out.actor_updated = true;
    ++actor_updates_;
    polyak_all();
    return out;
  }

  /// Tanh-squashed Gaussian log-density, summed over action dims.
  /// u is the pre-squash sample; columns are batch entries.
  template <class S>
  static MatX<S> squashed_log_prob(const MatX<S>& u, const MatX<S>& mean,
                                   const MatX<S>& log_std) {
    const S c = S(0.5) * std::log(S(2) * S(M_PI));
    MatX<S> z = (u - mean).array() / log_std.array().exp();
    MatX<S> per = (S(-0.5) * z.array().square() - log_std.array() - c -
                   (S(1) - u.array().tanh().square() + S(1e-6)).log())
                      .matrix();
    return per.colwise().sum();
  }

  /// Gradient of L = invb * sum_j [alpha * logpi_j] + <da, a> w.r.t. the actor
  /// head [mean; raw_log_std], for a fixed noise draw eps.  `da` must already
  /// carry the loss scaling of the critic term.
  template <class S>
  static MatX<S> sac_head_backward(const MatX<S>& mean, const MatX<S>& raw_ls,
                                   const MatX<S>& eps, const MatX<S>& da,
                                   S alpha_val, S invb) {
    MatX<S> log_std = raw_ls.cwiseMax(S(kLogStdMin)).cwiseMin(S(kLogStdMax));
    MatX<S> sigma = log_std.array().exp().matrix();
    MatX<S> u = mean + sigma.cwiseProduct(eps);
    MatX<S> a = u.array().tanh().matrix();
    MatX<S> one_m_a2 = (S(1) - a.array().square()).matrix();
    MatX<S> tanh_corr =
        (S(2) * a.array() * one_m_a2.array() / (one_m_a2.array() + S(1e-6)))
            .matrix();
    MatX<S> dmean = da.cwiseProduct(one_m_a2) + (alpha_val * invb) * tanh_corr;
    MatX<S> sig_eps = sigma.cwiseProduct(eps);
    MatX<S> dls =
        da.cwiseProduct(one_m_a2).cwiseProduct(sig_eps) +
        (alpha_val * invb) *
            (tanh_corr.cwiseProduct(sig_eps).array() - S(1)).matrix();
    for (Eigen::Index i = 0; i < dls.size(); ++i)
      if (raw_ls.data()[i] < S(kLogStdMin) || raw_ls.data()[i] > S(kLogStdMax))
        dls.data()[i] = S(0);
    MatX<S> dhead(mean.rows() + raw_ls.rows(), mean.cols());
    dhead << dmean, dls;
    return dhead;
  }

  // --- checkpoint support -------------------------------------------------

  /// All parameter tensors in serialization order.
  std::vector<ParamRef<float>> all_params() {
    std::vector<ParamRef<float>> out;
    auto add = [&](std::vector<ParamRef<float>> v) {
      out.insert(out.end(), v.begin(), v.end());
    };
    add(encoder_.params());
    add(actor_.params());
    add(critic1_.params());
    if (twin_critics()) add(critic2_.params());
    add(encoder_t_.params());
    add(actor_t_.params());
    add(critic1_t_.params());
    if (twin_critics()) add(critic2_t_.params());
    out.push_back({&log_alpha_, &g_log_alpha_, 1, {1}});
    return out;
  }

  // Exposed for targeted tests.
  Mlp<float>& actor() { return actor_; }
  Mlp<float>& critic1() { return critic1_; }
  Mlp<float>& critic2() { return critic2_; }
  Mlp<float>& actor_target() { return actor_t_; }
  Mlp<float>& critic1_target() { return critic1_t_; }
  Mlp<float>& critic2_target() { return critic2_t_; }
  ConvNet<float>& encoder() { return encoder_; }
  ConvNet<float>& encoder_target() { return encoder_t_; }

  /// Re-sync targets to online nets (used after loading a checkpoint written
  /// by an older writer; normal loads restore targets directly).
  void copy_targets() {
    copy_params(encoder_t_.params(), encoder_.params());
    copy_params(actor_t_.params(), actor_.params());
    copy_params(critic1_t_.params(), critic1_.params());
    if (twin_critics()) copy_params(critic2_t_.params(), critic2_.params());
  }

  static constexpr float kLogStdMin = -5.0f;
  static constexpr float kLogStdMax = 2.0f;

 private:
  std::vector<int> widths(int in, int out) const {
    std::vector<int> w = {in};
    for (uint32_t h : cfg_.net.trunk) w.push_back(int(h));
    w.push_back(out);
    return w;
  }

  int feature_dim() const {
    return (shapes_.has_image() ? encoder_.out_dim() : 0) + shapes_.proprio;
  }

  void check_modality(const Observation& obs) const {
    const bool want_img = shapes_.has_image();
    if (want_img != obs.image.has_value())
      throw ModalityMismatchError("observation image presence mismatch");
    if (want_img) {
      const auto& im = *obs.image;
      if (im.channels != shapes_.channels || im.height != shapes_.height ||
          im.width != shapes_.width)
        throw ModalityMismatchError("observation image dims mismatch");
    }
    if (int(obs.proprio.size()) != shapes_.proprio)
      throw ModalityMismatchError("proprio length mismatch");
  }

  void obs_to_cols(const Observation& obs, MatX<float>& img, MatX<float>& prop) const {
    if (obs.image) {
      img.resize(Eigen::Index(obs.image->data.size()), 1);
      for (Eigen::Index i = 0; i < img.rows(); ++i)
        img(i, 0) = obs.image->data[size_t(i)];
    } else {
      img.resize(0, 1);
    }
    prop.resize(Eigen::Index(obs.proprio.size()), 1);
    for (Eigen::Index i = 0; i < prop.rows(); ++i)
      prop(i, 0) = obs.proprio[size_t(i)];
  }

  /// [conv features; proprio] stacked; caches stay inside `enc`.
  MatX<float> forward_features(const MatX<float>& img, const MatX<float>& prop,
                               ConvNet<float>& enc) {
    if (!shapes_.has_image()) return prop;
    MatX<float> f = enc.forward(img);
    MatX<float> out(f.rows() + prop.rows(), f.cols());
    out << f, prop;
    return out;
  }

  MatX<float> critic_input(const MatX<float>& feat, const MatX<float>& action) const {
    MatX<float> in(feat.rows() + action.rows(), feat.cols());
    in << feat, action;
    return in;
  }

  std::vector<ParamRef<float>> critic_params() {
    std::vector<ParamRef<float>> ps = critic1_.params();
    if (twin_critics()) {
      auto p2 = critic2_.params();
      ps.insert(ps.end(), p2.begin(), p2.end());
    }
    if (shapes_.has_image()) {
      auto pe = encoder_.params();
      ps.insert(ps.end(), pe.begin(), pe.end());
    }
    return ps;
  }

  VecX<float> targets_td3(const Batch<float>& b) {
    MatX<float> feat_n = forward_features(b.next_image, b.next_proprio, encoder_t_);
    MatX<float> a_n = actor_t_.forward(feat_n);
    const float nc = float(cfg_.noise_clip);
    for (Eigen::Index i = 0; i < a_n.size(); ++i) {
      float noise = float(rng_.normal(0.0, cfg_.policy_noise));
      noise = std::clamp(noise, -nc, nc);
      a_n.data()[i] = std::clamp(a_n.data()[i] + noise, -1.0f, 1.0f);
    }
    MatX<float> q1 = critic1_t_.forward(critic_input(feat_n, a_n));
    MatX<float> q2 = critic2_t_.forward(critic_input(feat_n, a_n));
    MatX<float> qmin = q1.cwiseMin(q2);
    return bellman(b, qmin.row(0).transpose());
  }

  VecX<float> targets_ddpg(const Batch<float>& b) {
    MatX<float> feat_n = forward_features(b.next_image, b.next_proprio, encoder_t_);
    MatX<float> a_n = actor_t_.forward(feat_n);
    MatX<float> q = critic1_t_.forward(critic_input(feat_n, a_n));
    return bellman(b, q.row(0).transpose());
  }

  VecX<float> targets_sac(const Batch<float>& b) {
    MatX<float> feat_n = forward_features(b.next_image, b.next_proprio, encoder_t_);
    MatX<float> out = actor_.forward(feat_n);  // current actor, not a target
    MatX<float> mean = out.topRows(shapes_.action);
    MatX<float> log_std = clamp_log_std(out.bottomRows(shapes_.action));
    MatX<float> u = mean;
    for (Eigen::Index i = 0; i < u.size(); ++i)
      u.data()[i] += std::exp(log_std.data()[i]) * float(rng_.normal());
    MatX<float> a_n = u.array().tanh().matrix();
    MatX<float> logp = squashed_log_prob(u, mean, log_std);
    MatX<float> q1 = critic1_t_.forward(critic_input(feat_n, a_n));
    MatX<float> q2 = critic2_t_.forward(critic_input(feat_n, a_n));
    VecX<float> qmin = q1.cwiseMin(q2).row(0).transpose();
    qmin -= alpha() * logp.row(0).transpose();
    return bellman(b, qmin);
  }

  VecX<float> bellman(const Batch<float>& b, const VecX<float>& next_value) const {
    return b.reward + float(cfg_.gamma) * b.not_done.cwiseProduct(next_value);
  }

  /// MSE regression of the online critic(s) to y; trains the encoder.
  Losses critic_step(const Batch<float>& b, const VecX<float>& y) {
    auto ps = critic_params();
    zero_grads(ps);
    MatX<float> feat = forward_features(b.obs_image, b.obs_proprio, encoder_);
    const MatX<float> in = critic_input(feat, b.action);
    const float invb = 1.0f / float(b.reward.size());

    MatX<float> q1 = critic1_.forward(in);
    VecX<float> d1 = q1.row(0).transpose() - y;
    MatX<float> dq1 = (2.0f * invb) * d1.transpose();
    MatX<float> din = critic1_.backward(dq1);

    Losses out;
    out.critic = double(d1.squaredNorm()) * invb;
    out.q_mean = double(q1.row(0).mean());
    if (twin_critics()) {
      MatX<float> q2 = critic2_.forward(in);
      VecX<float> d2 = q2.row(0).transpose() - y;
      MatX<float> dq2 = (2.0f * invb) * d2.transpose();
      din += critic2_.backward(dq2);
      out.critic += double(d2.squaredNorm()) * invb;
    }
    if (shapes_.has_image())
      encoder_.backward(din.topRows(encoder_.out_dim()));
    critic_opt_.step(ps);
    return out;
  }

  /// TD3/DDPG actor: ascend Q1(s, actor(s)) on detached features.
  double deterministic_actor_step(const Batch<float>& b) {
    MatX<float> feat = forward_features(b.obs_image, b.obs_proprio, encoder_);
    MatX<float> a = actor_.forward(feat);
    MatX<float> q = critic1_.forward(critic_input(feat, a));
    const float invb = 1.0f / float(b.reward.size());
    MatX<float> dq = MatX<float>::Constant(1, a.cols(), -invb);
    MatX<float> din = critic1_.backward(dq, /*accumulate=*/false);
    MatX<float> da = din.bottomRows(shapes_.action);
    auto ps = actor_.params();
    zero_grads(ps);
    actor_.backward(da);  // feature gradient discarded: encoder detached
    actor_opt_.step(ps);
    return -double(q.row(0).mean());
  }

  Losses sac_actor_and_alpha_step(const Batch<float>& b, Losses out) {
    MatX<float> feat = forward_features(b.obs_image, b.obs_proprio, encoder_);
    MatX<float> head = actor_.forward(feat);
    MatX<float> mean = head.topRows(shapes_.action);
    MatX<float> raw_ls = head.bottomRows(shapes_.action);
    MatX<float> log_std = clamp_log_std(raw_ls);

    MatX<float> eps(mean.rows(), mean.cols());
    for (Eigen::Index i = 0; i < eps.size(); ++i)
      eps.data()[i] = float(rng_.normal());
    MatX<float> sigma = log_std.array().exp().matrix();
    MatX<float> u = mean + sigma.cwiseProduct(eps);
    MatX<float> a = u.array().tanh().matrix();
    MatX<float> logp = squashed_log_prob(u, mean, log_std);

    // dL/da via min of the two online critics.
    MatX<float> in1 = critic_input(feat, a);
    MatX<float> q1 = critic1_.forward(in1);
    MatX<float> q2 = critic2_.forward(in1);
    const Eigen::Index batch = a.cols();
    const float invb = 1.0f / float(batch);
    MatX<float> dq1 = MatX<float>::Zero(1, batch);
    MatX<float> dq2 = MatX<float>::Zero(1, batch);
    for (Eigen::Index j = 0; j < batch; ++j)
      (q1(0, j) <= q2(0, j) ? dq1(0, j) : dq2(0, j)) = -invb;
    MatX<float> da = critic1_.backward(dq1, false).bottomRows(shapes_.action);
    da += critic2_.backward(dq2, false).bottomRows(shapes_.action);

    // Entropy and critic terms chained through the reparameterized sample.
    const float al = alpha();
    MatX<float> dhead = sac_head_backward(mean, raw_ls, eps, da, al, invb);
    auto ps = actor_.params();
    zero_grads(ps);
    actor_.backward(dhead);
    actor_opt_.step(ps);

    const float mean_logp = logp.row(0).mean();
    out.actor = double(al * mean_logp -
                       (q1.cwiseMin(q2)).row(0).mean());

    // Temperature toward the entropy target.
    out.alpha = double(-log_alpha_ * (mean_logp + float(cfg_.entropy_target)));
    g_log_alpha_ = -(mean_logp + float(cfg_.entropy_target));
    std::vector<ParamRef<float>> ap = {{&log_alpha_, &g_log_alpha_, 1, {1}}};
    alpha_opt_.step(ap);
    out.alpha_value = double(alpha());
    return out;
  }

  static MatX<float> clamp_log_std(const MatX<float>& ls) {
    return ls.cwiseMax(kLogStdMin).cwiseMin(kLogStdMax);
  }

  void polyak_all() {
    const float tau = float(cfg_.tau);
    if (shapes_.has_image())
      polyak_update(encoder_t_.params(), encoder_.params(), tau);
    polyak_update(critic1_t_.params(), critic1_.params(), tau);
    if (twin_critics())
      polyak_update(critic2_t_.params(), critic2_.params(), tau);
    if (cfg_.algorithm != Algo::Sac)
      polyak_update(actor_t_.params(), actor_.params(), tau);
  }

  AgentConfig cfg_;
  ObsShapes shapes_;
  Rng rng_;  // update-time noise (target smoothing, sac sampling)

  ConvNet<float> encoder_, encoder_t_;
  Mlp<float> actor_, actor_t_;
  Mlp<float> critic1_, critic1_t_;
  Mlp<float> critic2_, critic2_t_;
  float log_alpha_ = 0.0f, g_log_alpha_ = 0.0f;

  Adam<float> critic_opt_, actor_opt_, alpha_opt_;
  int64_t critic_updates_ = 0, actor_updates_ = 0;
};

}  // namespace phrl
