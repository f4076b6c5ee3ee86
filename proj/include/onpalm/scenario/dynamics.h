#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "onpalm/lcs/lcs.h"
#include "onpalm/numopt/lcp_solver.h"
#include "onpalm/scenario/contacts.h"
#include "onpalm/scenario/scenario_config.h"
#include "onpalm/scenario/state.h"

namespace onpalm {
namespace scenario {

/// Rigid-body constants the smooth (contact-free) step needs.
struct SmoothParams {
  double ee_mass{0.37};
  double tray_mass{1.0};
  Eigen::Matrix3d tray_inertia{Eigen::Matrix3d::Identity()};
  double gravity{9.81};

  static SmoothParams FromConfig(const ScenarioConfig& cfg);
};

/// Semi-implicit Euler step of the contact-free dynamics. The ee is a
/// gravity-compensated point mass driven by u; the tray falls under gravity
/// and carries the gyroscopic term. The quaternion is advanced with
/// q̇ = ½ [0, ω] ⊗ q and left unnormalized.
template <typename T>
Eigen::Matrix<T, kNumStates, 1> SmoothStep(const SmoothParams& p,
                                           const Eigen::Matrix<T, kNumStates, 1>& x,
                                           const Eigen::Matrix<T, kNumInputs, 1>& u, double dt) {
  using V3 = Eigen::Matrix<T, 3, 1>;
  using M3 = Eigen::Matrix<T, 3, 3>;
  const T w = x(kTrayQuat), qx = x(kTrayQuat + 1), qy = x(kTrayQuat + 2), qz = x(kTrayQuat + 3);
  M3 R;
  R << T(1) - T(2) * (qy * qy + qz * qz), T(2) * (qx * qy - w * qz), T(2) * (qx * qz + w * qy),
      T(2) * (qx * qy + w * qz), T(1) - T(2) * (qx * qx + qz * qz), T(2) * (qy * qz - w * qx),
      T(2) * (qx * qz - w * qy), T(2) * (qy * qz + w * qx), T(1) - T(2) * (qx * qx + qy * qy);
  const M3 Ib = p.tray_inertia.template cast<T>();
  const M3 Iw = R * Ib * R.transpose();
  const V3 omega = x.template segment<3>(kTrayOmega);
  const V3 gyro = -Iw.inverse() * omega.cross(Iw * omega);

  Eigen::Matrix<T, kNumStates, 1> out;
  const V3 v_ee = x.template segment<3>(kEeVel) + T(dt / p.ee_mass) * u;
  const V3 om = omega + T(dt) * gyro;
  V3 v_tray = x.template segment<3>(kTrayVel);
  v_tray(2) -= T(dt * p.gravity);
  out.template segment<3>(kEeVel) = v_ee;
  out.template segment<3>(kTrayOmega) = om;
  out.template segment<3>(kTrayVel) = v_tray;
  out.template segment<3>(kEePos) = x.template segment<3>(kEePos) + T(dt) * v_ee;
  out.template segment<3>(kTrayPos) = x.template segment<3>(kTrayPos) + T(dt) * v_tray;
  const T h = T(0.5 * dt);
  out(kTrayQuat) = w - h * (qx * om(0) + qy * om(1) + qz * om(2));
  out(kTrayQuat + 1) = qx + h * (w * om(0) + qz * om(1) - qy * om(2));
  out(kTrayQuat + 2) = qy + h * (-qz * om(0) + w * om(1) + qx * om(2));
  out(kTrayQuat + 3) = qz + h * (qy * om(0) - qx * om(1) + w * om(2));
  return out;
}

/// N(q): 10×9 map from v to q̇. N⁺ is its left inverse for unit quaternions.
Eigen::MatrixXd KinematicMap(const Eigen::VectorXd& x);
Eigen::MatrixXd KinematicMapInverse(const Eigen::VectorXd& x);

/// Inverse of the 9×9 generalized mass matrix blockdiag(m_ee I, I_w, m_tray I).
Eigen::MatrixXd InverseMassMatrix(const ScenarioConfig& cfg, const Eigen::VectorXd& x);

/// LCS x⁺ = Ax + Bu + Dλ + d, 0 ≤ λ ⊥ Ex + Fλ + Hu + c ≥ 0 around (x, u):
/// the smooth step is linearized exactly; contact impulses enter as
/// D = dt·M⁻¹Rᵀ with R the stacked pyramid rays; the complementarity slack is
/// φ(q)/dt + R v⁺ with φ linearized through N⁺.
lcs::Lcs LinearizeDynamics(const ScenarioConfig& cfg, const Eigen::VectorXd& x,
                           const Eigen::VectorXd& u, double dt,
                           FrictionSource friction = FrictionSource::kModel,
                           std::vector<Contact>* contacts_out = nullptr);

class SimulationFault : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GroundTruthOptions {
  /// Extra translational mass rigidly attached to the ee (e.g. a gantry).
  double ee_extra_mass{0.0};
  /// Contacts with larger gaps are skipped for the step.
  double prefilter_gap{0.02};
  numopt::LcpOptions lcp;
};

/// Robot that carries the ee in generalized coordinates. `force` is the net
/// generalized force before contact (actuation minus bias); `ee_jacobian`
/// maps robot velocity to ee linear velocity.
struct RobotBody {
  Eigen::MatrixXd mass;
  Eigen::VectorXd velocity;
  Eigen::VectorXd force;
  Eigen::MatrixXd ee_jacobian;
};

struct GroundTruthResult {
  Eigen::VectorXd x_next;
  /// Ray forces in the scenario's fixed ray order; skipped contacts are 0.
  Eigen::VectorXd lambda;
  std::vector<Contact> contacts;
  Eigen::VectorXd robot_velocity;
  double lcp_residual{0.0};
};

/// One fine step of the nonlinear simulator with a Cartesian ee of mass
/// m_ee + extra driven by `ee_force` (gravity compensated). Contacts are
/// rebuilt at the current state with the measured friction; the quaternion is
/// renormalized. Throws SimulationFault on LCP failure or non-finite state.
GroundTruthResult GroundTruthStep(const ScenarioConfig& cfg, const Eigen::VectorXd& x,
                                  const Eigen::VectorXd& ee_force, double fine_dt,
                                  const GroundTruthOptions& opts = {},
                                  const Eigen::VectorXd* lambda_warm = nullptr);

/// Same step with the ee carried by `robot`. The ee entries of x give the
/// contact geometry; the returned x_next has ee velocity J v⁺ and ee
/// position advanced by dt·J v⁺ (callers with exact kinematics overwrite it).
GroundTruthResult GroundTruthStepCoupled(const ScenarioConfig& cfg, const Eigen::VectorXd& x,
                                         const RobotBody& robot, double fine_dt,
                                         const GroundTruthOptions& opts = {},
                                         const Eigen::VectorXd* lambda_warm = nullptr);

/// Kinetic plus gravitational energy of the tray and ee (ee mass m_ee).
double MechanicalEnergy(const ScenarioConfig& cfg, const Eigen::VectorXd& x);

}  // namespace scenario
}  // namespace onpalm

namespace onpalm {
namespace scenario {

/// Tray resting level on the rails at its initial position with the ee
/// parked well below it (out of contact).
Eigen::VectorXd RestingTrayState(const ScenarioConfig& cfg);

/// Rails and resting tray rotated by `angle` about the world y axis through
/// the rail-top point under the tray center. Gravity stays vertical.
void TiltSupports(double angle, ScenarioConfig& cfg, Eigen::VectorXd& x);

}  // namespace scenario
}  // namespace onpalm
