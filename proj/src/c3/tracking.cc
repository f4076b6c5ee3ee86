#include "onpalm/c3/tracking.h"

#include <algorithm>
#include <stdexcept>

namespace onpalm {
namespace c3 {

using Eigen::Vector3d;

TrackingTargets::TrackingTargets(const C3Solution& plan, int ee_velocity_index, PlanInputs inputs)
    : dt_(plan.dt) {
  if (plan.N() < 1 || plan.x.size() != plan.u.size() + 1) {
    throw std::invalid_argument("tracking targets need a nonempty plan");
  }
  for (const Eigen::VectorXd& x : plan.x) {
    positions_.push_back(x.head<3>());
    velocities_.push_back(x.segment<3>(ee_velocity_index));
  }
  const bool projected = inputs == PlanInputs::kProjected && plan.copies.size() == plan.u.size();
  for (int k = 0; k < plan.N(); ++k) {
    const Eigen::VectorXd& u = projected ? plan.copies[k] : plan.u[k];
    forces_.push_back(u.tail(plan.u[k].size()).head<3>());
  }
}

EeTarget TrackingTargets::At(double t) const {
  if (forces_.empty()) throw std::logic_error("tracking targets are empty");
  const int N = static_cast<int>(forces_.size());
  EeTarget out;
  if (t >= horizon()) {
    out.position = positions_.back();
    out.velocity = velocities_.back();
    out.acceleration.setZero();
    out.force = forces_.back();
    return out;
  }
  t = std::max(t, 0.0);
  const int k = std::min(static_cast<int>(t / dt_), N - 1);
  const double h = dt_;
  const double s = (t - k * h) / h;
  const Vector3d& p0 = positions_[k];
  const Vector3d& p1 = positions_[k + 1];
  const Vector3d m0 = h * velocities_[k];
  const Vector3d m1 = h * velocities_[k + 1];
  const double s2 = s * s, s3 = s2 * s;
  out.position = (2 * s3 - 3 * s2 + 1) * p0 + (s3 - 2 * s2 + s) * m0 + (-2 * s3 + 3 * s2) * p1 +
                 (s3 - s2) * m1;
  out.velocity = ((6 * s2 - 6 * s) * p0 + (3 * s2 - 4 * s + 1) * m0 + (-6 * s2 + 6 * s) * p1 +
                  (3 * s2 - 2 * s) * m1) /
                 h;
  out.acceleration = ((12 * s - 6) * p0 + (6 * s - 4) * m0 + (-12 * s + 6) * p1 +
                      (6 * s - 2) * m1) /
                     (h * h);
  out.force = forces_[k];
  return out;
}

}  // namespace c3
}  // namespace onpalm
