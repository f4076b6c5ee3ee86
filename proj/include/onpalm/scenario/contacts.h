#pragma once

#include <vector>

#include <Eigen/Dense>

#include "onpalm/scenario/geometry.h"
#include "onpalm/scenario/scenario_config.h"
#include "onpalm/scenario/state.h"

namespace onpalm {
namespace scenario {

enum class ContactKind { kEndEffector, kSupport, kWall };

struct Contact {
  ContactKind kind{ContactKind::kEndEffector};
  double phi{0.0};
  /// Point on the tray surface, world frame.
  Eigen::Vector3d witness{Eigen::Vector3d::Zero()};
  /// Point on the other body, world frame.
  Eigen::Vector3d other_point{Eigen::Vector3d::Zero()};
  /// Unit normal from the tray toward the other body; t1, t2 complete a
  /// right-handed orthonormal frame.
  Eigen::Vector3d normal{Eigen::Vector3d::UnitZ()};
  Eigen::Vector3d t1{Eigen::Vector3d::UnitX()};
  Eigen::Vector3d t2{Eigen::Vector3d::UnitY()};
  double mu{0.0};
};

using ContactRows = Eigen::Matrix<double, 3, kNumVelocities>;
using RayRows = Eigen::Matrix<double, 4, kNumVelocities>;

/// All contacts of the scenario at state x, in the fixed order
/// [ee points, support points (two per rail), wall point].
std::vector<Contact> ComputeContacts(const ScenarioConfig& cfg, const Eigen::VectorXd& x,
                                     FrictionSource friction);

/// End-effector contact points in the world frame at state x.
std::vector<Eigen::Vector3d> EndEffectorContactPoints(const ScenarioConfig& cfg,
                                                      const Eigen::VectorXd& x);

/// Rows [normal; t1; t2] mapping v to the velocity of the other body's
/// point relative to the tray's material point at the witness. Positive
/// normal velocity separates.
ContactRows ContactJacobian(const Eigen::VectorXd& x, const Contact& contact);

/// Extreme rays J_n + μ·J_t for t ∈ {+t1, −t1, +t2, −t2}.
RayRows AnitescuRays(const ContactRows& J, double mu);

/// Stacked ray matrix (4 rows per contact) and per-ray gap at state x.
void StackRays(const Eigen::VectorXd& x, const std::vector<Contact>& contacts,
               Eigen::MatrixXd& rays, Eigen::VectorXd& ray_gap);

/// Debug hook for the verify suite: flips the sign of every t1 Jacobian row.
void SetTangentFlipForTesting(bool enabled);
bool TangentFlipForTesting();

}  // namespace scenario
}  // namespace onpalm
