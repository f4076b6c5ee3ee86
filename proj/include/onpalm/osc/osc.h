#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace onpalm {
namespace osc {

/// Revolute joint of a serial chain. The joint frame sits at `offset` in the
/// parent joint frame (the base for joint 0) and turns about `axis`.
struct Link {
  Eigen::Vector3d offset{Eigen::Vector3d::Zero()};
  Eigen::Vector3d axis{Eigen::Vector3d::UnitZ()};
  double mass{0.0};
  /// Center of mass and body inertia about it, in the joint frame.
  Eigen::Vector3d com{Eigen::Vector3d::Zero()};
  Eigen::Matrix3d inertia{Eigen::Matrix3d::Zero()};
  /// Reflected rotor inertia added to the mass-matrix diagonal.
  double armature{0.0};
  double torque_limit{100.0};
};

struct Kinematics {
  Eigen::Vector3d position;
  Eigen::Matrix3d rotation;
  /// Linear (rows 0..2) and angular (rows 3..5) tool Jacobian.
  Eigen::MatrixXd jacobian;
  /// J̇ q̇ for the same rows.
  Eigen::VectorXd bias_acceleration;
};

class ManipulatorModel {
 public:
  ManipulatorModel(std::vector<Link> links, Eigen::Vector3d tool_offset, double gravity = 9.81);

  int num_joints() const { return static_cast<int>(links_.size()); }
  const std::vector<Link>& links() const { return links_; }
  Eigen::VectorXd TorqueLimits() const;

  Kinematics ToolKinematics(const Eigen::VectorXd& q, const Eigen::VectorXd& qd) const;
  Eigen::MatrixXd MassMatrix(const Eigen::VectorXd& q) const;
  /// C(q, q̇): Coriolis, centrifugal and gravity torques.
  Eigen::VectorXd Bias(const Eigen::VectorXd& q, const Eigen::VectorXd& qd) const;
  /// τ = M q̈ + C + Jᵀ f with f the force the tool applies to its surroundings.
  Eigen::VectorXd InverseDynamics(const Eigen::VectorXd& q, const Eigen::VectorXd& qd,
                                  const Eigen::VectorXd& qdd,
                                  const Eigen::Vector3d& tool_force = Eigen::Vector3d::Zero()) const;

  /// Shift the tool point mass (e.g. a welded end effector) into the last link.
  void AddToolMass(double mass);

 private:
  Eigen::VectorXd Rnea(const Eigen::VectorXd& q, const Eigen::VectorXd& qd,
                       const Eigen::VectorXd& qdd, double gravity) const;

  std::vector<Link> links_;
  Eigen::Vector3d tool_offset_;
  double gravity_;
};

/// Yaw–pitch–pitch spatial arm with the shoulder 0.35 m above the base.
ManipulatorModel BuiltinTestArm();
/// Two pitch joints in the x–z plane; links of length l1, l2 with centers of
/// mass at lc1, lc2.
ManipulatorModel PlanarTwoLink(double l1, double l2, double m1, double m2, double lc1, double lc2,
                               double i1, double i2, double gravity = 9.81);
/// Joint angles placing the built-in arm's tool at `p`, elbow raised above
/// the shoulder–tool line.
Eigen::VectorXd BuiltinArmInverseKinematics(const Eigen::Vector3d& p);

struct Reference {
  Eigen::VectorXd y;
  Eigen::VectorXd yd;
  Eigen::VectorXd ydd;
};

/// Task-space map ψ with its Jacobian and J̇q̇.
struct TaskMap {
  Eigen::VectorXd y;
  Eigen::MatrixXd jacobian;
  Eigen::VectorXd bias;
};

struct TaskSpaceObjective {
  std::string name;
  std::function<TaskMap(const ManipulatorModel&, const Eigen::VectorXd& q,
                        const Eigen::VectorXd& qd)>
      map;
  std::function<Reference(double t)> reference;
  Eigen::VectorXd weights;
  double kp{400.0};
  double kd{40.0};
};

/// ÿ_cmd = ÿ_des + K_p (y_des − y) + K_d (ẏ_des − ẏ).
Eigen::VectorXd TaskSpaceAccCmd(const TaskSpaceObjective& obj, double t, const Eigen::VectorXd& y,
                                const Eigen::VectorXd& yd);

/// Objectives of the built-in arm: tool position, the posture of joint 1
/// (the first pitch joint), and the tool z axis pointing up.
TaskMap ToolPositionMap(const ManipulatorModel& m, const Eigen::VectorXd& q,
                        const Eigen::VectorXd& qd);
TaskMap JointMap(int joint, const ManipulatorModel& m, const Eigen::VectorXd& q,
                 const Eigen::VectorXd& qd);
/// x, y components of the tool z axis (zero when it points straight up).
TaskMap ToolAxisMap(const ManipulatorModel& m, const Eigen::VectorXd& q,
                    const Eigen::VectorXd& qd);

struct OscProblem {
  std::vector<TaskSpaceObjective> objectives;
  std::function<Eigen::Vector3d(double t)> force_target;
  /// Diagonal weight on ‖λ − λ_ee(t)‖²; all zeros removes λ (λ = 0).
  Eigen::Vector3d force_weight{Eigen::Vector3d::Constant(10.0)};
  /// Joint-acceleration ridge that keeps the program strictly convex.
  double regularization{1e-8};
};

struct OscSolution {
  bool ok{false};
  std::string error;
  Eigen::VectorXd torque;
  Eigen::Vector3d force{Eigen::Vector3d::Zero()};
  Eigen::VectorXd qdd;
  /// ‖M q̈ + C − u + Jᵀλ‖∞.
  double dynamics_residual{0.0};
  /// Joints whose torque bound is active.
  std::vector<int> binding_joints;
};

/// Minimizes ‖λ − λ_ee(t)‖²_W + Σᵢ ‖Jᵢq̈ + J̇ᵢq̇ − ÿ_cmd,i‖²_{Wᵢ} subject to
/// M q̈ + C = u − Jᵀλ and the torque limits. λ is the force the tool puts on
/// its surroundings, so a static arm holding a weight w has u = C + Jᵀ(w ẑ).
OscSolution OscSolve(const ManipulatorModel& model, const Eigen::VectorXd& q,
                     const Eigen::VectorXd& qd, const OscProblem& problem, double t);

struct OscParams {
  double kp{400.0};
  double kd{40.0};
  double force_weight{10.0};
  double position_weight{1.0};
  double posture_weight{1e-3};
  double posture_kp{100.0};
  double posture_kd{20.0};
  double posture_target{-1.15};
  /// The built-in arm cannot hold the tool axis and a 3D position at once;
  /// off by default.
  double tool_axis_weight{0.0};
  bool force_objective{true};
};

/// Position, posture and (optional) tool-axis objectives for the built-in arm,
/// with the position reference and force target supplied by the caller.
OscProblem BuiltinArmProblem(const OscParams& params,
                             std::function<Reference(double)> position_reference,
                             std::function<Eigen::Vector3d(double)> force_target);

}  // namespace osc
}  // namespace onpalm
