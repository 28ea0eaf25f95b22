#pragma once

#include <array>
#include <cmath>

#include "phrl/core.hpp"
#include "phrl/pose.hpp"

namespace phrl {

using Joints = Eigen::Matrix<double, 6, 1>;
using Jacobian6 = Eigen::Matrix<double, 6, 6>;

/// Classic DH row: Rz(theta + theta_offset) Tz(d) Tx(a) Rx(alpha).
struct DhRow {
  double a = 0.0;
  double alpha = 0.0;
  double d = 0.0;
  double theta_offset = 0.0;
};

struct JointRange {
  double lo = 0.0;
  double hi = 0.0;
};

/// 6-DOF serial arm: DH table, joint limits and the two fixed flange
/// offsets (tool tip and camera). Offsets never change after construction.
struct ArmModel {
  std::array<DhRow, 6> dh{};
  std::array<JointRange, 6> joint_limits{};
  Pose tool_offset;    // flange -> peg tip
  Pose camera_offset;  // flange -> camera (z = optical axis)

  /// UR5e nominal kinematics. Tool and camera offsets are artifact
  /// defaults: peg hangs 15 cm below the flange (gripper + peg), camera
  /// rides next to the wrist looking along the flange z axis.
  static ArmModel ur5e() {
    ArmModel m;
    const double pi2 = M_PI / 2.0;
    m.dh[0] = {0.0, pi2, 0.1625, 0.0};
    m.dh[1] = {-0.425, 0.0, 0.0, 0.0};
    m.dh[2] = {-0.3922, 0.0, 0.0, 0.0};
    m.dh[3] = {0.0, pi2, 0.1333, 0.0};
    m.dh[4] = {0.0, -pi2, 0.0997, 0.0};
    m.dh[5] = {0.0, 0.0, 0.0996, 0.0};
    for (auto& l : m.joint_limits) l = {-2.0 * M_PI, 2.0 * M_PI};
    m.tool_offset = Pose::Translation(0.0, 0.0, 0.150);
    m.camera_offset = Pose::Translation(0.035, 0.0, -0.020);
    return m;
  }

  void validate() const {
    for (const auto& l : joint_limits)
      if (!(l.lo < l.hi)) throw ConfigError("joint limit lo must be < hi");
  }
};

inline void check_joint_limits(const ArmModel& model, const Joints& q) {
  for (int i = 0; i < 6; ++i) {
    if (!std::isfinite(q[i]))
      throw JointLimitError("joint " + std::to_string(i) + " not finite");
    if (q[i] < model.joint_limits[i].lo || q[i] > model.joint_limits[i].hi)
      throw JointLimitError("joint " + std::to_string(i) + " = " +
                            std::to_string(q[i]) + " outside limits");
  }
}

inline Joints clamp_to_limits(const ArmModel& model, Joints q) {
  for (int i = 0; i < 6; ++i)
    q[i] = std::clamp(q[i], model.joint_limits[i].lo, model.joint_limits[i].hi);
  return q;
}

namespace detail {

inline Pose dh_pose(const DhRow& row, double theta) {
  const double t = theta + row.theta_offset;
  Pose p;
  p.orientation = Quat(Eigen::AngleAxisd(t, Vec3::UnitZ())) *
                  Quat(Eigen::AngleAxisd(row.alpha, Vec3::UnitX()));
  p.orientation.normalize();
  p.position = Vec3(row.a * std::cos(t), row.a * std::sin(t), row.d);
  return p;
}

}  // namespace detail

/// Pose of the flange (frame after joint 6, before tool offset).
inline Pose flange_pose(const ArmModel& model, const Joints& q) {
  check_joint_limits(model, q);
  Pose t = Pose::Identity();
  for (int i = 0; i < 6; ++i) t = t * detail::dh_pose(model.dh[i], q[i]);
  return t;
}

/// Peg-tip pose in world. Quaternion is unit-norm by construction.
inline Pose forward_kinematics(const ArmModel& model, const Joints& q) {
  return flange_pose(model, q) * model.tool_offset;
}

inline Pose camera_pose(const ArmModel& model, const Joints& q) {
  return flange_pose(model, q) * model.camera_offset;
}

/// Geometric Jacobian of the peg tip: rows 0-2 linear, 3-5 angular
/// velocity per unit joint rate, world frame.
inline Jacobian6 jacobian(const ArmModel& model, const Joints& q) {
  check_joint_limits(model, q);
  std::array<Vec3, 6> axis, origin;
  Pose t = Pose::Identity();
  for (int i = 0; i < 6; ++i) {
    axis[i] = t.rotation().col(2);  // joint i rotates about z of frame i-1
    origin[i] = t.position;
    t = t * detail::dh_pose(model.dh[i], q[i]);
  }
  const Vec3 tip = (t * model.tool_offset).position;
  Jacobian6 j;
  for (int i = 0; i < 6; ++i) {
    j.block<3, 1>(0, i) = axis[i].cross(tip - origin[i]);
    j.block<3, 1>(3, i) = axis[i];
  }
  return j;
}

struct CartesianStepParams {
  double max_step = 0.005;  // |delta| cap, m
  double damping = 1e-3;    // DLS lambda
};

/// Joint increment realizing a Cartesian tip displacement. Solves the
/// full 6-DOF damped least-squares problem with zero commanded angular
/// velocity so the tool orientation is held (the peg stays vertical);
/// a purely positional solve lets orientation drift across steps.
/// The returned increment already accounts for joint-limit clamping.
inline Joints resolve_cartesian_step(const ArmModel& model, const Joints& q,
                                     const Vec3& delta,
                                     const CartesianStepParams& params = {}) {
  check_joint_limits(model, q);
  if (delta.norm() > params.max_step)
    throw StepTooLargeError("cartesian step " + std::to_string(delta.norm()) +
                            " exceeds max " + std::to_string(params.max_step));
  const Jacobian6 j = jacobian(model, q);
  Eigen::Matrix<double, 6, 1> twist;
  twist << delta, Vec3::Zero();
  Jacobian6 w = j * j.transpose();
  w.diagonal().array() += params.damping * params.damping;
  const Eigen::LDLT<Jacobian6> ldlt(w);
  if (ldlt.info() != Eigen::Success)
    throw SingularError("damped normal matrix not solvable");
  const Joints dq = j.transpose() * ldlt.solve(twist);
  return clamp_to_limits(model, q + dq) - q;
}

}  // namespace phrl
