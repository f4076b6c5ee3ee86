#pragma once

#include <Eigen/Dense>

#include "onpalm/scenario/scenario_config.h"

namespace onpalm {
namespace scenario {

struct Pose {
  Eigen::Quaterniond rotation{Eigen::Quaterniond::Identity()};
  Eigen::Vector3d position{Eigen::Vector3d::Zero()};
};

struct SignedDistance {
  double phi{0.0};
  /// World-frame unit normal pointing from the tray toward the point.
  Eigen::Vector3d normal{Eigen::Vector3d::UnitZ()};
  /// Closest point on the tray surface (world frame).
  Eigen::Vector3d witness{Eigen::Vector3d::Zero()};
};

/// Signed distance from a sphere of `sphere_radius` centered at `point` to the
/// tray's collision cylinder. On face/side edges the face normal wins; a point
/// on the axis at mid-height takes −z of the tray frame.
SignedDistance SignedDistancePointTray(const Eigen::Vector3d& point, const Pose& tray_pose,
                                       const TrayParams& tray, double sphere_radius = 0.0);

/// Farthest point of the tray cylinder along world direction `dir`
/// (support mapping); side midpoints are used when `dir` lies in the tray
/// plane.
Eigen::Vector3d TraySupportPoint(const Eigen::Vector3d& dir, const Pose& tray_pose,
                                 const TrayParams& tray);

}  // namespace scenario
}  // namespace onpalm
