#include "onpalm/scenario/geometry.h"

#include <cmath>

namespace onpalm {
namespace scenario {

using Eigen::Vector2d;
using Eigen::Vector3d;

SignedDistance SignedDistancePointTray(const Vector3d& point, const Pose& tray_pose,
                                       const TrayParams& tray, double sphere_radius) {
  const Eigen::Quaterniond rot = tray_pose.rotation.normalized();
  const Vector3d p = rot.conjugate() * (point - tray_pose.position);
  const double R = tray.radius;
  const double hh = 0.5 * tray.height;
  const double rho = std::hypot(p.x(), p.y());
  const double side = p.z() > 0.0 ? 1.0 : -1.0;  // z = 0 resolves to the bottom face
  const double dr = rho - R;
  const double dz = std::abs(p.z()) - hh;
  Vector2d radial(1.0, 0.0);
  if (rho > 1e-12) radial = p.head<2>() / rho;

  Vector3d n_local, w_local;
  double phi;
  if (dr <= 0.0 && dz > 0.0) {
    phi = dz;
    n_local = Vector3d(0, 0, side);
    w_local = Vector3d(p.x(), p.y(), side * hh);
  } else if (dr > 0.0 && dz <= 0.0) {
    phi = dr;
    n_local = Vector3d(radial.x(), radial.y(), 0.0);
    w_local = Vector3d(R * radial.x(), R * radial.y(), p.z());
  } else if (dr > 0.0 && dz > 0.0) {
    phi = std::hypot(dr, dz);
    n_local = Vector3d(dr * radial.x(), dr * radial.y(), dz * side) / phi;
    w_local = Vector3d(R * radial.x(), R * radial.y(), side * hh);
  } else if (dz >= dr) {
    // Inside, nearer to a face (ties go to the face).
    phi = dz;
    n_local = Vector3d(0, 0, side);
    w_local = Vector3d(p.x(), p.y(), side * hh);
  } else {
    phi = dr;
    n_local = Vector3d(radial.x(), radial.y(), 0.0);
    w_local = Vector3d(R * radial.x(), R * radial.y(), p.z());
  }
  SignedDistance out;
  out.phi = phi - sphere_radius;
  out.normal = rot * n_local;
  out.witness = rot * w_local + tray_pose.position;
  return out;
}

Vector3d TraySupportPoint(const Vector3d& dir, const Pose& tray_pose, const TrayParams& tray) {
  const Eigen::Quaterniond rot = tray_pose.rotation.normalized();
  const Vector3d d = rot.conjugate() * dir;
  const double rho = std::hypot(d.x(), d.y());
  Vector3d local = Vector3d::Zero();
  if (rho > 1e-12) local.head<2>() = tray.radius * d.head<2>() / rho;
  const double hh = 0.5 * tray.height;
  if (std::abs(d.z()) > 1e-9) local.z() = d.z() > 0.0 ? hh : -hh;
  return rot * local + tray_pose.position;
}

}  // namespace scenario
}  // namespace onpalm
