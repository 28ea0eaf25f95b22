#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "phrl/agents.hpp"
#include "phrl/core.hpp"

namespace phrl {

// Agent checkpoint: magic "PHRL", version u32, algorithm u32, network spec,
// input shapes, then every parameter tensor as (rank u32, dims u32...,
// 32-bit float data).  Integers and floats are little-endian (native here).

inline constexpr uint32_t kCheckpointVersion = 1;

namespace ckpt_detail {

inline void put_u32(std::ostream& os, uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), 4);
}

inline uint32_t get_u32(std::istream& is) {
  uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 4);
  if (!is) throw IoError("checkpoint truncated");
  return v;
}

inline void put_spec(std::ostream& os, const NetSpec& s) {
  put_u32(os, uint32_t(s.conv.size()));
  for (const auto& c : s.conv) {
    put_u32(os, c.out_channels);
    put_u32(os, c.kernel);
    put_u32(os, c.stride);
  }
  put_u32(os, uint32_t(s.trunk.size()));
  for (uint32_t w : s.trunk) put_u32(os, w);
}

inline NetSpec get_spec(std::istream& is) {
  NetSpec s;
  s.conv.resize(get_u32(is));
  for (auto& c : s.conv) {
    c.out_channels = get_u32(is);
    c.kernel = get_u32(is);
    c.stride = get_u32(is);
  }
  s.trunk.resize(get_u32(is));
  for (auto& w : s.trunk) w = get_u32(is);
  return s;
}

}  // namespace ckpt_detail

inline void save_checkpoint(std::ostream& os, Agent& agent) {
  using ckpt_detail::put_u32;
  os.write("PHRL", 4);
  put_u32(os, kCheckpointVersion);
  put_u32(os, uint32_t(agent.config().algorithm));
  ckpt_detail::put_spec(os, agent.config().net);
  const ObsShapes& sh = agent.shapes();
  put_u32(os, uint32_t(sh.channels));
  put_u32(os, uint32_t(sh.height));
  put_u32(os, uint32_t(sh.width));
  put_u32(os, uint32_t(sh.proprio));
  put_u32(os, uint32_t(sh.action));
  auto params = agent.all_params();
  put_u32(os, uint32_t(params.size()));
  for (const auto& p : params) {
    put_u32(os, uint32_t(p.dims.size()));
    for (uint32_t d : p.dims) put_u32(os, d);
    os.write(reinterpret_cast<const char*>(p.value),
             std::streamsize(p.size) * 4);
  }
  if (!os) throw IoError("checkpoint write failed");
}

inline void save_checkpoint(const std::string& path, Agent& agent) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for write: " + path);
  save_checkpoint(f, agent);
}

/// Rebuild an agent from a checkpoint.  `base` supplies training
/// hyperparameters (they are not stored); algorithm and architecture always
/// come from the file.
inline Agent load_checkpoint(std::istream& is,
                             std::optional<AgentConfig> base = std::nullopt) {
  using ckpt_detail::get_u32;
  char magic[4] = {};
  is.read(magic, 4);
  if (!is || std::string(magic, 4) != "PHRL")
    throw IoError("bad checkpoint magic");
  const uint32_t version = get_u32(is);
  if (version != kCheckpointVersion)
    throw IoError("unsupported checkpoint version " + std::to_string(version));
  const uint32_t algo = get_u32(is);
  if (algo > 2) throw IoError("bad algorithm tag");
  AgentConfig cfg = base.value_or(AgentConfig{});
  cfg.algorithm = Algo(algo);
  cfg.net = ckpt_detail::get_spec(is);
  ObsShapes sh;
  sh.channels = int(get_u32(is));
  sh.height = int(get_u32(is));
  sh.width = int(get_u32(is));
  sh.proprio = int(get_u32(is));
  sh.action = int(get_u32(is));
  Agent agent(cfg, sh);
  auto params = agent.all_params();
  const uint32_t count = get_u32(is);
  if (count != params.size())
    throw IoError("checkpoint tensor count mismatch");
  for (auto& p : params) {
    const uint32_t rank = get_u32(is);
    if (rank != p.dims.size()) throw IoError("checkpoint tensor rank mismatch");
    Eigen::Index total = 1;
    for (uint32_t r = 0; r < rank; ++r) {
      const uint32_t d = get_u32(is);
      if (d != p.dims[r]) throw IoError("checkpoint tensor dim mismatch");
      total *= d;
    }
    if (total != p.size) throw IoError("checkpoint tensor size mismatch");
    is.read(reinterpret_cast<char*>(p.value), std::streamsize(p.size) * 4);
    if (!is) throw IoError("checkpoint truncated");
  }
  return agent;
}

inline Agent load_checkpoint(const std::string& path,
                             std::optional<AgentConfig> base = std::nullopt) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open checkpoint: " + path);
  return load_checkpoint(f, base);
}

}  // namespace phrl
