#pragma once

#include <vector>

#include <Eigen/Dense>

#include "onpalm/c3/c3.h"

namespace onpalm {
namespace c3 {

struct EeTarget {
  Eigen::Vector3d position;
  Eigen::Vector3d velocity;
  Eigen::Vector3d acceleration;
  Eigen::Vector3d force;
};

/// Time-parameterized ee targets from a plan: cubic Hermite position through
/// the knot positions with the planned knot velocities, and a zero-order hold
/// of the planned inputs. Time is measured from the plan's first knot;
/// queries outside the horizon clamp to its ends.
/// Source of the held inputs: the returned QP iterate, or the projected
/// consensus copies, whose (λ, u) satisfy complementarity at each knot.
enum class PlanInputs { kIterate, kProjected };

class TrackingTargets {
 public:
  TrackingTargets() = default;
  /// Knot velocities are read from `ee_velocity_index` of each state.
  explicit TrackingTargets(const C3Solution& plan, int ee_velocity_index = 10,
                           PlanInputs inputs = PlanInputs::kIterate);

  EeTarget At(double t) const;
  double horizon() const { return dt_ * static_cast<double>(forces_.size()); }
  bool empty() const { return forces_.empty(); }

 private:
  double dt_{0.0};
  std::vector<Eigen::Vector3d> positions_;
  std::vector<Eigen::Vector3d> velocities_;
  std::vector<Eigen::Vector3d> forces_;
};

}  // namespace c3
}  // namespace onpalm
