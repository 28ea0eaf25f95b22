#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>

namespace phrl {

using Vec3 = Eigen::Vector3d;
using Quat = Eigen::Quaterniond;

/// Rigid transform: p_world = orientation * p_local + position.
struct Pose {
  Vec3 position{Vec3::Zero()};
  Quat orientation{Quat::Identity()};

  static Pose Identity() { return {}; }

  static Pose Translation(double x, double y, double z) {
    Pose p;
    p.position = Vec3(x, y, z);
    return p;
  }

  static Pose Translation(const Vec3& t) {
    Pose p;
    p.position = t;
    return p;
  }

  /// Rotation about world z plus translation; the pose of a flat object
  /// on the table.
  static Pose PlanarYaw(double x, double y, double z, double yaw) {
    Pose p;
    p.position = Vec3(x, y, z);
    p.orientation = Quat(Eigen::AngleAxisd(yaw, Vec3::UnitZ()));
    return p;
  }

  Pose compose(const Pose& other) const {
    Pose r;
    r.position = position + orientation * other.position;
    r.orientation = (orientation * other.orientation).normalized();
    return r;
  }

  Pose inverse() const {
    Pose r;
    r.orientation = orientation.conjugate();
    r.position = -(r.orientation * position);
    return r;
  }

  Vec3 apply(const Vec3& p) const { return position + orientation * p; }

  Vec3 rotate(const Vec3& v) const { return orientation * v; }

  Eigen::Matrix3d rotation() const { return orientation.toRotationMatrix(); }

  /// Angle of the relative rotation to another pose, radians.
  double orientation_angle_to(const Pose& other) const {
    return orientation.angularDistance(other.orientation);
  }
};

inline Pose operator*(const Pose& a, const Pose& b) { return a.compose(b); }

}  // namespace phrl
