#pragma once

#include <cstdint>

#include "phrl/arm.hpp"
#include "phrl/core.hpp"
#include "phrl/pose.hpp"

namespace phrl {

struct Rgb8 {
  uint8_t r = 0, g = 0, b = 0;
  bool operator==(const Rgb8&) const = default;
};

/// Static scene: peg cylinder, block with a blind cylindrical hole
/// centered in its top face, table plane z = 0. Block pose lives in
/// SceneState; the block frame origin is the box center.
struct SceneGeometry {
  double peg_radius = 0.010;
  double peg_length = 0.060;
  Vec3 block_extents{0.120, 0.120, 0.060};
  double hole_radius = 0.012;
  double hole_depth = 0.030;
  Rgb8 table_color{70, 70, 72};
  Rgb8 background_color{12, 12, 16};

  /// Diametral clearance between peg and hole (how much wider the hole is).
  double clearance() const { return 2.0 * (hole_radius - peg_radius); }
  /// Maximum lateral offset of the peg axis that still fits the hole.
  double radial_clearance() const { return hole_radius - peg_radius; }

  void validate() const {
    if (!(clearance() > 0.0)) throw ConfigError("peg does not fit the hole");
    if (hole_depth > block_extents.z())
      throw ConfigError("hole deeper than the block");
  }
};

/// Full simulation state. Peg pose follows from the joints via forward
/// kinematics; the block rests flat on the table (pose = center height
/// extents.z/2, yaw only).
struct SceneState {
  Joints joints{Joints::Zero()};
  Pose block_pose;
  Rgb8 block_color{60, 90, 220};
  Rgb8 peg_color{220, 60, 40};
  bool in_collision = false;
  int time_step = 0;
};

struct ContactReport {
  bool colliding = false;
  double peg_inside_hole_depth = 0.0;  // m below the rim, lateral fit only
};

/// Peg cylinder (vertical, tip at `tip`, extending up peg_length) against
/// block solid (box minus hole) and table. The peg is treated as exactly
/// vertical; the controller holds orientation so tilt never exceeds
/// numerical noise.
inline ContactReport check_collision(const SceneGeometry& g, const Vec3& tip,
                                     const Pose& block_pose) {
  ContactReport rep;
  if (tip.z() < 0.0) rep.colliding = true;

  const Vec3 tip_b = block_pose.inverse().apply(tip);
  const double hz = g.block_extents.z() / 2.0;
  const double rim_z = hz;                      // top face, block frame
  const double hole_bottom_z = hz - g.hole_depth;
  const double lateral = std::hypot(tip_b.x(), tip_b.y());

  // lateral fit + tip below rim -> insertion depth (capped at the bottom)
  if (lateral <= g.radial_clearance() && tip_b.z() < rim_z)
    rep.peg_inside_hole_depth = std::min(rim_z - tip_b.z(), g.hole_depth);

  const double zlo = std::max(tip_b.z(), -hz);
  const double zhi = std::min(tip_b.z() + g.peg_length, hz);
  if (zlo >= zhi) return rep;  // no vertical overlap with the block

  // circle vs box cross-section
  const double cx = std::clamp(tip_b.x(), -g.block_extents.x() / 2.0,
                               g.block_extents.x() / 2.0);
  const double cy = std::clamp(tip_b.y(), -g.block_extents.y() / 2.0,
                               g.block_extents.y() / 2.0);
  const double outside =
      std::hypot(tip_b.x() - cx, tip_b.y() - cy);
  if (outside >= g.peg_radius) return rep;  // clear of the box laterally

  if (zlo < hole_bottom_z) {
    rep.colliding = true;  // overlaps the solid slab below the hole
    return rep;
  }
  // overlap confined to the hole slab: safe only if the peg cross-section
  // sits fully inside the hole disc
  if (lateral > g.radial_clearance()) rep.colliding = true;
  return rep;
}

struct TargetErrorResult {
  double distance = 0.0;          // 3D distance tip -> target point
  Eigen::Vector2d xy_error{0, 0};  // tip minus hole axis, block frame, m
};

/// Distance to the in-hole target (hole axis, `insertion_depth` below the
/// rim) and the signed lateral error in the block's horizontal frame.
inline TargetErrorResult target_error(const SceneGeometry& g, const Vec3& tip,
                                      const Pose& block_pose,
                                      double insertion_depth = 0.010) {
  const Vec3 tip_b = block_pose.inverse().apply(tip);
  const double rim_z = g.block_extents.z() / 2.0;
  const Vec3 target_b(0.0, 0.0, rim_z - insertion_depth);
  TargetErrorResult r;
  r.distance = (tip_b - target_b).norm();
  r.xy_error = tip_b.head<2>();
  return r;
}

}  // namespace phrl
