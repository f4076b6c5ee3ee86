#pragma once

#include <Eigen/Dense>

namespace onpalm {
namespace scenario {

// LCS state layout. q = [ee xyz, tray quaternion wxyz, tray xyz],
// v = [ee velocity, tray angular velocity (world), tray velocity].
inline constexpr int kNumPositions = 10;
inline constexpr int kNumVelocities = 9;
inline constexpr int kNumStates = 19;
inline constexpr int kNumInputs = 3;

inline constexpr int kEePos = 0;
inline constexpr int kTrayQuat = 3;
inline constexpr int kTrayPos = 7;
inline constexpr int kEeVel = 10;
inline constexpr int kTrayOmega = 13;
inline constexpr int kTrayVel = 16;

// Velocity-space offsets (within v).
inline constexpr int kVEe = 0;
inline constexpr int kVOmega = 3;
inline constexpr int kVTray = 6;

using StateVector = Eigen::Matrix<double, kNumStates, 1>;

inline Eigen::Quaterniond TrayQuaternion(const Eigen::VectorXd& x) {
  return Eigen::Quaterniond(x(kTrayQuat), x(kTrayQuat + 1), x(kTrayQuat + 2),
                            x(kTrayQuat + 3));
}

inline void SetTrayQuaternion(Eigen::VectorXd& x, const Eigen::Quaterniond& q) {
  x(kTrayQuat) = q.w();
  x(kTrayQuat + 1) = q.x();
  x(kTrayQuat + 2) = q.y();
  x(kTrayQuat + 3) = q.z();
}

/// State with the given ee and tray positions, identity orientation, at rest.
inline Eigen::VectorXd MakeState(const Eigen::Vector3d& ee, const Eigen::Vector3d& tray,
                                 const Eigen::Quaterniond& quat = Eigen::Quaterniond::Identity()) {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(kNumStates);
  x.segment<3>(kEePos) = ee;
  x.segment<3>(kTrayPos) = tray;
  SetTrayQuaternion(x, quat);
  return x;
}

/// Rotation about z by `yaw` radians.
inline Eigen::Quaterniond YawQuaternion(double yaw) {
  return Eigen::Quaterniond(Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()));
}

/// Yaw of the tray's x axis in the world xy plane.
inline double TrayYaw(const Eigen::VectorXd& x) {
  const Eigen::Vector3d ax = TrayQuaternion(x).normalized() * Eigen::Vector3d::UnitX();
  return std::atan2(ax.y(), ax.x());
}

}  // namespace scenario
}  // namespace onpalm
