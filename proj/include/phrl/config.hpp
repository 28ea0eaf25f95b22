#pragma once

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "phrl/agents.hpp"
#include "phrl/env.hpp"

namespace phrl {

/// Everything a training run needs, resolvable from one flat key=value file.
struct ExperimentConfig {
  EnvConfig env;
  AgentConfig agent;
  long total_steps = 50000;
  long eval_every = 5000;
  int rollouts_per_eval = 12;
  int update_every = 1;        ///< gradient step every N env steps
  long replay_capacity = 100000;
  double early_stop_success = 2.0;  ///< stop when eval success >= this; >1 disables
  std::string preset;
  std::string out_dir = "out";
  uint64_t seed = 0;

  void validate() const {
    env.validate();
    agent.validate();
    if (total_steps < agent.warmup_steps)
      throw ConfigError("train.total_steps must cover agent.warmup_steps");
    if (eval_every < 1) throw ConfigError("train.eval_every must be >= 1");
    if (rollouts_per_eval < 1) throw ConfigError("train.rollouts_per_eval must be >= 1");
    if (update_every < 1) throw ConfigError("train.update_every must be >= 1");
    if (replay_capacity < agent.batch)
      throw ConfigError("train.replay_capacity must hold at least one batch");
  }
};

namespace config_detail {

/// Shortest decimal form of v that parses back to exactly v.
inline std::string fmt_double(double v) {
  char buf[40];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

inline std::string fmt_bool(bool v) { return v ? "true" : "false"; }

/// Ordered key=value pairs from one file; '#' starts a comment, blank lines
/// are skipped, duplicate keys are errors.
class KvFile {
 public:
  static KvFile parse(const std::string& text) {
    KvFile kv;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const size_t hash = line.find('#');
      if (hash != std::string::npos) line.resize(hash);
      const auto is_space = [](unsigned char c) { return std::isspace(c); };
      if (std::all_of(line.begin(), line.end(), is_space)) continue;
      const size_t eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
      std::string key = trim(line.substr(0, eq));
      std::string value = trim(line.substr(eq + 1));
      if (key.empty())
        throw ConfigError("line " + std::to_string(lineno) + ": empty key");
      if (kv.values_.count(key)) throw ConfigError("duplicate key '" + key + "'");
      kv.order_.push_back(key);
      kv.values_[key] = std::move(value);
    }
    return kv;
  }

  static std::string trim(std::string s) {
    const auto not_space = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    return s;
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  /// Raw value, marking the key as consumed.
  const std::string* claim(const std::string& key) {
    auto it = values_.find(key);
    if (it == values_.end()) return nullptr;
    claimed_.insert(key);
    return &it->second;
  }

  void get(const std::string& key, std::string& out) {
    if (const std::string* v = claim(key)) out = *v;
  }
  void get(const std::string& key, bool& out) {
    if (const std::string* v = claim(key)) {
      if (*v == "true")
        out = true;
      else if (*v == "false")
        out = false;
      else
        throw ConfigError("key '" + key + "': expected true or false, got '" + *v + "'");
    }
  }
  void get(const std::string& key, double& out) {
    if (const std::string* v = claim(key)) {
      char* end = nullptr;
      const double d = std::strtod(v->c_str(), &end);
      if (end == v->c_str() || *end != '\0')
        throw ConfigError("key '" + key + "': expected a number, got '" + *v + "'");
      out = d;
    }
  }
  template <class Int>
  void get_int(const std::string& key, Int& out) {
    if (const std::string* v = claim(key)) {
      char* end = nullptr;
      const long long i = std::strtoll(v->c_str(), &end, 10);
      if (end == v->c_str() || *end != '\0')
        throw ConfigError("key '" + key + "': expected an integer, got '" + *v + "'");
      out = Int(i);
    }
  }
  void get(const std::string& key, int& out) { get_int(key, out); }
  void get(const std::string& key, long& out) { get_int(key, out); }
  void get(const std::string& key, uint64_t& out) { get_int(key, out); }

  /// All keys never claimed, in file order.
  std::vector<std::string> unclaimed() const {
    std::vector<std::string> out;
    for (const std::string& k : order_)
      if (!claimed_.count(k)) out.push_back(k);
    return out;
  }

  /// Keys under "prefix." in file order.
  std::vector<std::string> keys_under(const std::string& prefix) const {
    std::vector<std::string> out;
    for (const std::string& k : order_)
      if (k.rfind(prefix + ".", 0) == 0) out.push_back(k);
    return out;
  }

 private:
  std::vector<std::string> order_;
  std::map<std::string, std::string> values_;
  std::set<std::string> claimed_;
};

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) out.push_back(KvFile::trim(item));
  if (!out.empty() && out.back().empty()) out.pop_back();
  return out;
}

inline std::string algo_name(Algo a) {
  switch (a) {
    case Algo::Td3: return "td3";
    case Algo::Ddpg: return "ddpg";
    case Algo::Sac: return "sac";
  }
  throw ConfigError("unknown algorithm value");
}

inline Algo algo_from(const std::string& s) {
  if (s == "td3") return Algo::Td3;
  if (s == "ddpg") return Algo::Ddpg;
  if (s == "sac") return Algo::Sac;
  throw ConfigError("key 'agent.algorithm': expected td3, ddpg or sac, got '" + s + "'");
}

inline std::string conv_to_string(const std::vector<ConvSpec>& conv) {
  std::string out;
  for (size_t i = 0; i < conv.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(conv[i].out_channels) + "x" + std::to_string(conv[i].kernel) + "x" +
           std::to_string(conv[i].stride);
  }
  return out;
}

inline std::vector<ConvSpec> conv_from_string(const std::string& s) {
  std::vector<ConvSpec> out;
  for (const std::string& item : split(s, ',')) {
    const std::vector<std::string> f = split(item, 'x');
    if (f.size() != 3)
      throw ConfigError("key 'agent.net.conv': expected CxKxS entries, got '" + item + "'");
    ConvSpec c;
    c.out_channels = uint32_t(std::stoul(f[0]));
    c.kernel = uint32_t(std::stoul(f[1]));
    c.stride = uint32_t(std::stoul(f[2]));
    out.push_back(c);
  }
  return out;
}

inline std::string trunk_to_string(const std::vector<uint32_t>& t) {
  std::string out;
  for (size_t i = 0; i < t.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(t[i]);
  }
  return out;
}

inline std::vector<uint32_t> trunk_from_string(const std::string& s) {
  std::vector<uint32_t> out;
  for (const std::string& item : split(s, ','))
    out.push_back(uint32_t(std::stoul(item)));
  return out;
}

/// Augmentation op lists live under "augment.gray." / "augment.depth.":
///   augment.gray.ops = solarize,emboss           # order = sampling order
///   augment.gray.solarize.probability = 0.3
///   augment.gray.solarize.threshold = 64,192     # lo,hi range
inline void write_aug_section(std::ostream& os, const std::string& prefix,
                              const AugSpec& spec) {
  os << prefix << ".ops = ";
  for (size_t i = 0; i < spec.ops.size(); ++i)
    os << (i ? "," : "") << spec.ops[i].name;
  os << "\n";
  for (const AugOp& op : spec.ops) {
    os << prefix << "." << op.name << ".probability = " << fmt_double(op.probability)
       << "\n";
    for (const auto& [k, r] : op.params)
      os << prefix << "." << op.name << "." << k << " = " << fmt_double(r[0]) << ","
         << fmt_double(r[1]) << "\n";
  }
}

inline AugSpec read_aug_section(KvFile& kv, const std::string& prefix,
                                AugChannel channel) {
  AugSpec spec;
  spec.channel = channel;
  const std::string* ops = kv.claim(prefix + ".ops");
  if (!ops) {
    // Section absent: fall back to the full default pipeline.
    spec = channel == AugChannel::Gray ? default_gray_spec() : default_depth_spec();
    return spec;
  }
  for (const std::string& name : split(*ops, ',')) {
    AugOp op;
    op.name = name;
    kv.get(prefix + "." + name + ".probability", op.probability);
    // Claim every remaining key for this op as a lo,hi parameter range; the
    // ops themselves validate which parameters they need when sampling.
    for (const std::string& key : kv.keys_under(prefix + "." + name)) {
      const std::string param = key.substr(prefix.size() + name.size() + 2);
      if (param == "probability") continue;
      const std::string* v = kv.claim(key);
      const std::vector<std::string> f = split(*v, ',');
      if (f.size() != 2)
        throw ConfigError("key '" + key + "': expected lo,hi");
      op.params.push_back({param, {std::strtod(f[0].c_str(), nullptr),
                                   std::strtod(f[1].c_str(), nullptr)}});
    }
    spec.ops.push_back(std::move(op));
  }
  validate(spec);
  return spec;
}

}  // namespace config_detail

/// Canonical key=value rendering; every key is emitted, so the output doubles
/// as documentation of the defaults.  parse_config_text(serialize_config(c))
/// reproduces c exactly.
inline std::string serialize_config(const ExperimentConfig& c) {
  using config_detail::fmt_bool;
  using config_detail::fmt_double;
  std::ostringstream os;
  os << "# experiment\n";
  os << "seed = " << c.seed << "\n";
  os << "preset = " << c.preset << "\n";
  os << "out_dir = " << c.out_dir << "\n";
  os << "\n# training schedule\n";
  os << "train.total_steps = " << c.total_steps << "\n";
  os << "train.eval_every = " << c.eval_every << "\n";
  os << "train.rollouts_per_eval = " << c.rollouts_per_eval << "\n";
  os << "train.update_every = " << c.update_every << "\n";
  os << "train.replay_capacity = " << c.replay_capacity << "\n";
  os << "train.early_stop_success = " << fmt_double(c.early_stop_success) << "\n";
  os << "\n# environment\n";
  os << "env.obs_size = " << c.env.obs_size << "\n";
  os << "env.render_size = " << c.env.intrinsics.width << "\n";
  os << "env.max_steps = " << c.env.max_steps << "\n";
  os << "env.action_scale = " << fmt_double(c.env.action_scale) << "\n";
  os << "env.success_threshold = " << fmt_double(c.env.success_threshold) << "\n";
  os << "env.insertion_depth = " << fmt_double(c.env.insertion_depth) << "\n";
  os << "env.min_visible_fraction = " << fmt_double(c.env.min_visible_fraction) << "\n";
  os << "env.rgb = " << fmt_bool(c.env.modalities.rgb) << "\n";
  os << "env.depth = " << fmt_bool(c.env.modalities.depth) << "\n";
  os << "env.proprio = " << fmt_bool(c.env.modalities.proprio) << "\n";
  os << "env.proprio_hole_vec = " << fmt_bool(c.env.proprio_hole_vec) << "\n";
  os << "env.sensor_depth_noise = " << fmt_bool(c.env.sensor_depth_noise) << "\n";
  os << "env.gray_augs = " << fmt_bool(c.env.gray_aug.has_value()) << "\n";
  os << "env.depth_augs = " << fmt_bool(c.env.depth_aug.has_value()) << "\n";
  os << "env.reward.w_dist = " << fmt_double(c.env.reward.w_dist) << "\n";
  os << "env.reward.r_success = " << fmt_double(c.env.reward.r_success) << "\n";
  os << "env.reward.r_collision = " << fmt_double(c.env.reward.r_collision) << "\n";
  os << "env.reward.r_time = " << fmt_double(c.env.reward.r_time) << "\n";
  os << "env.table.x_lo = " << fmt_double(c.env.table_region.x_lo) << "\n";
  os << "env.table.x_hi = " << fmt_double(c.env.table_region.x_hi) << "\n";
  os << "env.table.y_lo = " << fmt_double(c.env.table_region.y_lo) << "\n";
  os << "env.table.y_hi = " << fmt_double(c.env.table_region.y_hi) << "\n";
  os << "env.geometry.peg_radius = " << fmt_double(c.env.geometry.peg_radius) << "\n";
  os << "env.geometry.peg_length = " << fmt_double(c.env.geometry.peg_length) << "\n";
  os << "env.geometry.hole_radius = " << fmt_double(c.env.geometry.hole_radius) << "\n";
  os << "env.geometry.hole_depth = " << fmt_double(c.env.geometry.hole_depth) << "\n";
  os << "env.geometry.block_x = " << fmt_double(c.env.geometry.block_extents.x()) << "\n";
  os << "env.geometry.block_y = " << fmt_double(c.env.geometry.block_extents.y()) << "\n";
  os << "env.geometry.block_z = " << fmt_double(c.env.geometry.block_extents.z()) << "\n";
  os << "\n# agent\n";
  os << "agent.algorithm = " << config_detail::algo_name(c.agent.algorithm) << "\n";
  os << "agent.gamma = " << fmt_double(c.agent.gamma) << "\n";
  os << "agent.tau = " << fmt_double(c.agent.tau) << "\n";
  os << "agent.batch = " << c.agent.batch << "\n";
  os << "agent.actor_lr = " << fmt_double(c.agent.actor_lr) << "\n";
  os << "agent.critic_lr = " << fmt_double(c.agent.critic_lr) << "\n";
  os << "agent.exploration_noise = " << fmt_double(c.agent.exploration_noise) << "\n";
  os << "agent.policy_noise = " << fmt_double(c.agent.policy_noise) << "\n";
  os << "agent.noise_clip = " << fmt_double(c.agent.noise_clip) << "\n";
  os << "agent.policy_delay = " << c.agent.policy_delay << "\n";
  os << "agent.entropy_target = " << fmt_double(c.agent.entropy_target) << "\n";
  os << "agent.init_temperature = " << fmt_double(c.agent.init_temperature) << "\n";
  os << "agent.alpha_lr = " << fmt_double(c.agent.alpha_lr) << "\n";
  os << "agent.warmup_steps = " << c.agent.warmup_steps << "\n";
  os << "agent.net.conv = " << config_detail::conv_to_string(c.agent.net.conv) << "\n";
  os << "agent.net.trunk = " << config_detail::trunk_to_string(c.agent.net.trunk) << "\n";
  if (c.env.gray_aug) {
    os << "\n# grayscale augmentation pipeline\n";
    config_detail::write_aug_section(os, "augment.gray", *c.env.gray_aug);
  }
  if (c.env.depth_aug) {
    os << "\n# depth augmentation pipeline\n";
    config_detail::write_aug_section(os, "augment.depth", *c.env.depth_aug);
  }
  return os.str();
}

/// The experiment seed drives every stream; per-component seeds derive from
/// it so env and agent never consume the same raw sequence.
inline void apply_seed(ExperimentConfig& c, uint64_t seed) {
  c.seed = seed;
  c.env.seed = mix_seed(seed, 11);
  c.agent.seed = mix_seed(seed, 22);
}

/// Strict parse: unknown keys are hard errors naming the key; absent keys
/// keep their defaults, so the empty string yields the default config.
inline ExperimentConfig parse_config_text(const std::string& text) {
  using config_detail::KvFile;
  KvFile kv = KvFile::parse(text);
  ExperimentConfig c;

  kv.get("seed", c.seed);
  kv.get("preset", c.preset);
  kv.get("out_dir", c.out_dir);

  kv.get("train.total_steps", c.total_steps);
  kv.get("train.eval_every", c.eval_every);
  kv.get("train.rollouts_per_eval", c.rollouts_per_eval);
  kv.get("train.update_every", c.update_every);
  kv.get("train.replay_capacity", c.replay_capacity);
  kv.get("train.early_stop_success", c.early_stop_success);

  kv.get("env.obs_size", c.env.obs_size);
  int render = c.env.intrinsics.width;
  kv.get("env.render_size", render);
  if (render != c.env.intrinsics.width) {
    // Square render at a fixed field of view: focal length and center scale
    // with the resolution.
    const double scale = double(render) / c.env.intrinsics.width;
    c.env.intrinsics.fx *= scale;
    c.env.intrinsics.fy *= scale;
    c.env.intrinsics.cx *= scale;
    c.env.intrinsics.cy *= scale;
    c.env.intrinsics.width = c.env.intrinsics.height = render;
  }
  kv.get("env.max_steps", c.env.max_steps);
  kv.get("env.action_scale", c.env.action_scale);
  kv.get("env.success_threshold", c.env.success_threshold);
  kv.get("env.insertion_depth", c.env.insertion_depth);
  kv.get("env.min_visible_fraction", c.env.min_visible_fraction);
  kv.get("env.rgb", c.env.modalities.rgb);
  kv.get("env.depth", c.env.modalities.depth);
  kv.get("env.proprio", c.env.modalities.proprio);
  kv.get("env.proprio_hole_vec", c.env.proprio_hole_vec);
  kv.get("env.sensor_depth_noise", c.env.sensor_depth_noise);
  kv.get("env.reward.w_dist", c.env.reward.w_dist);
  kv.get("env.reward.r_success", c.env.reward.r_success);
  kv.get("env.reward.r_collision", c.env.reward.r_collision);
  kv.get("env.reward.r_time", c.env.reward.r_time);
  kv.get("env.table.x_lo", c.env.table_region.x_lo);
  kv.get("env.table.x_hi", c.env.table_region.x_hi);
  kv.get("env.table.y_lo", c.env.table_region.y_lo);
  kv.get("env.table.y_hi", c.env.table_region.y_hi);
  kv.get("env.geometry.peg_radius", c.env.geometry.peg_radius);
  kv.get("env.geometry.peg_length", c.env.geometry.peg_length);
  kv.get("env.geometry.hole_radius", c.env.geometry.hole_radius);
  kv.get("env.geometry.hole_depth", c.env.geometry.hole_depth);
  kv.get("env.geometry.block_x", c.env.geometry.block_extents.x());
  kv.get("env.geometry.block_y", c.env.geometry.block_extents.y());
  kv.get("env.geometry.block_z", c.env.geometry.block_extents.z());

  if (const std::string* v = kv.claim("agent.algorithm"))
    c.agent.algorithm = config_detail::algo_from(*v);
  kv.get("agent.gamma", c.agent.gamma);
  kv.get("agent.tau", c.agent.tau);
  kv.get("agent.batch", c.agent.batch);
  kv.get("agent.actor_lr", c.agent.actor_lr);
  kv.get("agent.critic_lr", c.agent.critic_lr);
  kv.get("agent.exploration_noise", c.agent.exploration_noise);
  kv.get("agent.policy_noise", c.agent.policy_noise);
  kv.get("agent.noise_clip", c.agent.noise_clip);
  kv.get("agent.policy_delay", c.agent.policy_delay);
  kv.get("agent.entropy_target", c.agent.entropy_target);
  kv.get("agent.init_temperature", c.agent.init_temperature);
  kv.get("agent.alpha_lr", c.agent.alpha_lr);
  kv.get("agent.warmup_steps", c.agent.warmup_steps);
  if (const std::string* v = kv.claim("agent.net.conv"))
    c.agent.net.conv = config_detail::conv_from_string(*v);
  if (const std::string* v = kv.claim("agent.net.trunk"))
    c.agent.net.trunk = config_detail::trunk_from_string(*v);

  bool gray_augs = false, depth_augs = false;
  kv.get("env.gray_augs", gray_augs);
  kv.get("env.depth_augs", depth_augs);
  // Sections are parsed (and validated) whenever present so typos never pass
  // silently, but only attached when the corresponding toggle is on.
  AugSpec gray = config_detail::read_aug_section(kv, "augment.gray", AugChannel::Gray);
  AugSpec depth = config_detail::read_aug_section(kv, "augment.depth", AugChannel::Depth);
  if (gray_augs) c.env.gray_aug = std::move(gray);
  if (depth_augs) c.env.depth_aug = std::move(depth);

  const std::vector<std::string> leftovers = kv.unclaimed();
  if (!leftovers.empty()) throw ConfigError("unknown key '" + leftovers.front() + "'");

  apply_seed(c, c.seed);
  c.validate();
  return c;
}

inline ExperimentConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

/// Standalone pipeline file holding exactly one augment.gray / augment.depth
/// section (the same syntax embedded in experiment configs).
inline AugSpec parse_aug_spec_text(const std::string& text) {
  using config_detail::KvFile;
  KvFile kv = KvFile::parse(text);
  const bool gray = kv.has("augment.gray.ops");
  const bool depth = kv.has("augment.depth.ops");
  if (gray == depth)
    throw ConfigError(
        "spec must define exactly one of augment.gray.ops / augment.depth.ops");
  AugSpec spec = config_detail::read_aug_section(
      kv, gray ? "augment.gray" : "augment.depth",
      gray ? AugChannel::Gray : AugChannel::Depth);
  const std::vector<std::string> leftovers = kv.unclaimed();
  if (!leftovers.empty()) throw ConfigError("unknown key '" + leftovers.front() + "'");
  return spec;
}

inline AugSpec parse_aug_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open spec file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_aug_spec_text(ss.str());
}

inline std::string serialize_aug_spec(const AugSpec& spec) {
  std::ostringstream os;
  config_detail::write_aug_section(
      os, spec.channel == AugChannel::Gray ? "augment.gray" : "augment.depth", spec);
  return os.str();
}

}  // namespace phrl
