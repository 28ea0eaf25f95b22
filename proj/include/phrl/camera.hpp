#pragma once

#include <Eigen/Dense>

#include "phrl/core.hpp"
#include "phrl/pose.hpp"

namespace phrl {

/// Pinhole model. Camera frame: +z forward (viewing direction), +x right,
/// +y down, matching pixel axes. u = fx*x/z + cx with no half-pixel offset.
struct CameraIntrinsics {
  int width = 128;
  int height = 128;
  double fx = 75.0;
  double fy = 75.0;
  double cx = 64.0;
  double cy = 64.0;
  double depth_min = 0.05;   // meters; closer hits report invalid depth
  double depth_max = 1.2;    // meters; farther hits report invalid depth

  void validate() const {
    if (width <= 0 || height <= 0 || fx <= 0 || fy <= 0)
      throw ConfigError("camera intrinsics must be positive");
    if (depth_min <= 0 || depth_max <= depth_min)
      throw ConfigError("camera depth range must satisfy 0 < min < max");
  }
};

inline Eigen::Vector2d project_point(const CameraIntrinsics& c, const Vec3& p_cam) {
  if (!(p_cam.z() > 0.0))
    throw BehindCameraError("cannot project point with z <= 0");
  return {c.fx * p_cam.x() / p_cam.z() + c.cx,
          c.fy * p_cam.y() / p_cam.z() + c.cy};
}

/// Inverse of project_point for a known z-depth (meters).
inline Vec3 deproject_pixel(const CameraIntrinsics& c, double u, double v, double depth) {
  if (!(depth > 0.0))
    throw BehindCameraError("cannot deproject non-positive depth");
  return {(u - c.cx) / c.fx * depth, (v - c.cy) / c.fy * depth, depth};
}

/// World-frame ray through pixel center (u, v). Direction is unit length.
struct Ray {
  Vec3 origin;
  Vec3 direction;
};

inline Ray pixel_ray(const CameraIntrinsics& c, const Pose& camera_pose, double u, double v) {
  const Vec3 dir_cam((u - c.cx) / c.fx, (v - c.cy) / c.fy, 1.0);
  return {camera_pose.position, (camera_pose.rotate(dir_cam)).normalized()};
}

}  // namespace phrl
