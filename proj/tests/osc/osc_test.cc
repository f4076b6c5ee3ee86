#include "onpalm/osc/osc.h"

#include <chrono>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

namespace {

using Eigen::MatrixXd;
using Eigen::Vector3d;
using Eigen::VectorXd;
using namespace onpalm::osc;

VectorXd RandomConfig(std::mt19937& rng, int n) {
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  VectorXd q(n);
  for (int i = 0; i < n; ++i) q(i) = u(rng);
  return q;
}

TaskSpaceObjective ConstantObjective(int dim, double kp, double kd) {
  TaskSpaceObjective obj;
  obj.kp = kp;
  obj.kd = kd;
  obj.weights = VectorXd::Ones(dim);
  obj.reference = [dim](double) {
    return Reference{VectorXd::Zero(dim), VectorXd::Zero(dim), VectorXd::Zero(dim)};
  };
  return obj;
}

TEST(TaskSpaceAccCmdTest, Examples) {
  TaskSpaceObjective obj = ConstantObjective(1, 100.0, 20.0);
  obj.reference = [](double t) {
    return Reference{VectorXd::Constant(1, 0.01), VectorXd::Zero(1), VectorXd::Constant(1, t)};
  };
  // On reference: only the feedforward remains.
  EXPECT_DOUBLE_EQ(TaskSpaceAccCmd(obj, 0.7, VectorXd::Constant(1, 0.01), VectorXd::Zero(1))(0),
                   0.7);
  EXPECT_NEAR(TaskSpaceAccCmd(obj, 0.0, VectorXd::Zero(1), VectorXd::Zero(1))(0), 1.0, 1e-12);
  EXPECT_NEAR(TaskSpaceAccCmd(obj, 0.0, VectorXd::Zero(1), VectorXd::Constant(1, -0.05))(0), 2.0,
              1e-12);
}

TEST(ManipulatorTest, PlanarMassMatrixMatchesClosedForm) {
  const double l1 = 0.6, m1 = 2.0, m2 = 1.3, lc1 = 0.27, lc2 = 0.21, i1 = 0.07, i2 = 0.04;
  const ManipulatorModel arm = PlanarTwoLink(l1, 0.45, m1, m2, lc1, lc2, i1, i2);
  std::mt19937 rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const VectorXd q = RandomConfig(rng, 2);
    const double c2 = std::cos(q(1));
    MatrixXd M(2, 2);
    M(0, 0) = i1 + i2 + m1 * lc1 * lc1 + m2 * (l1 * l1 + lc2 * lc2 + 2 * l1 * lc2 * c2);
    M(0, 1) = M(1, 0) = i2 + m2 * (lc2 * lc2 + l1 * lc2 * c2);
    M(1, 1) = i2 + m2 * lc2 * lc2;
    EXPECT_LT((arm.MassMatrix(q) - M).cwiseAbs().maxCoeff(), 1e-9);
    // Gravity torque from the potential m g z of both centers of mass.
    const double g = 9.81;
    VectorXd grav(2);
    grav(0) = -m1 * g * lc1 * std::cos(q(0)) - m2 * g * (l1 * std::cos(q(0)) + lc2 * std::cos(q(0) + q(1)));
    grav(1) = -m2 * g * lc2 * std::cos(q(0) + q(1));
    EXPECT_LT((arm.Bias(q, VectorXd::Zero(2)) - grav).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(ManipulatorTest, MassMatrixSymmetricPositiveDefinite) {
  const ManipulatorModel arm = BuiltinTestArm();
  std::mt19937 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const MatrixXd M = arm.MassMatrix(RandomConfig(rng, 3));
    EXPECT_LT((M - M.transpose()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_GT(M.selfadjointView<Eigen::Lower>().eigenvalues().minCoeff(), 0.0);
  }
}

TEST(ManipulatorTest, JacobianAndBiasMatchFiniteDifferences) {
  const ManipulatorModel arm = BuiltinTestArm();
  std::mt19937 rng(5);
  const double h = 1e-6;
  for (int trial = 0; trial < 20; ++trial) {
    const VectorXd q = RandomConfig(rng, 3);
    const VectorXd qd = RandomConfig(rng, 3);
    const Kinematics k = arm.ToolKinematics(q, qd);
    MatrixXd J_fd(3, 3);
    for (int j = 0; j < 3; ++j) {
      const VectorXd e = VectorXd::Unit(3, j) * h;
      J_fd.col(j) = (arm.ToolKinematics(q + e, qd).position -
                     arm.ToolKinematics(q - e, qd).position) / (2 * h);
    }
    EXPECT_LT((k.jacobian.topRows<3>() - J_fd).cwiseAbs().maxCoeff(), 1e-6);
    // J̇q̇ = d/dε J(q + ε q̇) q̇.
    const MatrixXd Jp = arm.ToolKinematics(q + h * qd, qd).jacobian;
    const MatrixXd Jm = arm.ToolKinematics(q - h * qd, qd).jacobian;
    EXPECT_LT(((Jp - Jm) / (2 * h) * qd - k.bias_acceleration).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(ManipulatorTest, CoriolisMatchesLagrangian) {
  const ManipulatorModel arm = BuiltinTestArm();
  std::mt19937 rng(6);
  const double h = 1e-6;
  for (int trial = 0; trial < 20; ++trial) {
    const VectorXd q = RandomConfig(rng, 3);
    const VectorXd qd = RandomConfig(rng, 3);
    // C q̇ = Ṁ q̇ − ½ ∂/∂q (q̇ᵀ M q̇).
    const MatrixXd Mdot =
        (arm.MassMatrix(q + h * qd) - arm.MassMatrix(q - h * qd)) / (2 * h);
    VectorXd grad(3);
    for (int j = 0; j < 3; ++j) {
      const VectorXd e = VectorXd::Unit(3, j) * h;
      grad(j) = (qd.dot(arm.MassMatrix(q + e) * qd) - qd.dot(arm.MassMatrix(q - e) * qd)) / (2 * h);
    }
    const VectorXd coriolis = arm.Bias(q, qd) - arm.Bias(q, VectorXd::Zero(3));
    EXPECT_LT((coriolis - (Mdot * qd - 0.5 * grad)).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(ManipulatorTest, InverseKinematicsReachesPoint) {
  const ManipulatorModel arm = BuiltinTestArm();
  for (const Vector3d& p : {Vector3d(0.55, 0.0, 0.45), Vector3d(0.45, 0.1, 0.6),
                            Vector3d(0.7, -0.2, 0.4)}) {
    const VectorXd q = BuiltinArmInverseKinematics(p);
    EXPECT_LT((arm.ToolKinematics(q, VectorXd::Zero(3)).position - p).norm(), 1e-12);
    // Elbow above the shoulder.
    EXPECT_LT(q(1), 0.0);
  }
}

OscProblem HoldProblem(const ManipulatorModel& arm, const VectorXd& q, const Vector3d& force,
                       double force_weight) {
  OscParams params;
  params.force_weight = force_weight;
  params.force_objective = force_weight > 0.0;
  params.posture_target = q(1);
  const Vector3d p = arm.ToolKinematics(q, VectorXd::Zero(3)).position;
  return BuiltinArmProblem(
      params, [p](double) { return Reference{p, VectorXd::Zero(3), VectorXd::Zero(3)}; },
      [force](double) { return force; });
}

TEST(OscSolveTest, ZeroGravityAtRestGivesZeroTorque) {
  std::vector<Link> links = BuiltinTestArm().links();
  const ManipulatorModel arm(links, Vector3d(0.5, 0, 0), 0.0);
  const VectorXd q = BuiltinArmInverseKinematics(Vector3d(0.55, 0.0, 0.45));
  const OscSolution s = OscSolve(arm, q, VectorXd::Zero(3), HoldProblem(arm, q, Vector3d::Zero(), 10.0), 0.0);
  ASSERT_TRUE(s.ok) << s.error;
  EXPECT_LT(s.torque.cwiseAbs().maxCoeff(), 1e-8);
}

TEST(OscSolveTest, HoldingTrayWeightNeedsGravityPlusJacobianTranspose) {
  const ManipulatorModel arm = BuiltinTestArm();
  const VectorXd q = BuiltinArmInverseKinematics(Vector3d(0.55, 0.0, 0.45));
  const Vector3d w(0.0, 0.0, 9.81);
  const OscSolution s = OscSolve(arm, q, VectorXd::Zero(3), HoldProblem(arm, q, w, 10.0), 0.0);
  ASSERT_TRUE(s.ok) << s.error;
  // Oracle: gravity from the potential of the two pitch links, Jᵀ by
  // differencing the forward kinematics.
  const double g = 9.81, h = 1e-6;
  VectorXd grav = VectorXd::Zero(3);
  grav(1) = -2.0 * g * 0.25 * std::cos(q(1)) -
            1.5 * g * (0.5 * std::cos(q(1)) + 0.25 * std::cos(q(1) + q(2)));
  grav(2) = -1.5 * g * 0.25 * std::cos(q(1) + q(2));
  MatrixXd J(3, 3);
  for (int j = 0; j < 3; ++j) {
    const VectorXd e = VectorXd::Unit(3, j) * h;
    J.col(j) = (arm.ToolKinematics(q + e, VectorXd::Zero(3)).position -
                arm.ToolKinematics(q - e, VectorXd::Zero(3)).position) / (2 * h);
  }
  EXPECT_LT((s.torque - (grav + J.transpose() * w)).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_LT((s.force - w).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_LT(s.dynamics_residual, 1e-8);
}

TEST(OscSolveTest, ZeroForceWeightIsPlainTaskSpaceInverseDynamics) {
  const ManipulatorModel arm = BuiltinTestArm();
  std::mt19937 rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    const VectorXd q = BuiltinArmInverseKinematics(Vector3d(0.5, 0.05, 0.5)) + 0.1 * RandomConfig(rng, 3);
    const VectorXd qd = 0.3 * RandomConfig(rng, 3);
    OscProblem prob = HoldProblem(arm, q, Vector3d(1, 2, 3), 0.0);
    prob.objectives[0].reference = [](double) {
      return Reference{Vector3d(0.52, 0.04, 0.48), Vector3d(0.1, 0, -0.1), Vector3d(0.5, 0, 0)};
    };
    const OscSolution s = OscSolve(arm, q, qd, prob, 0.0);
    ASSERT_TRUE(s.ok);
    // Weighted least squares on the objectives, then u = M q̈ + C.
    MatrixXd H = prob.regularization * MatrixXd::Identity(3, 3);
    VectorXd rhs = VectorXd::Zero(3);
    for (const TaskSpaceObjective& obj : prob.objectives) {
      const TaskMap tm = obj.map(arm, q, qd);
      const VectorXd acc = TaskSpaceAccCmd(obj, 0.0, tm.y, tm.jacobian * qd);
      H += tm.jacobian.transpose() * obj.weights.asDiagonal() * tm.jacobian;
      rhs += tm.jacobian.transpose() * obj.weights.asDiagonal() * (acc - tm.bias);
    }
    const VectorXd qdd = H.ldlt().solve(rhs);
    const VectorXd u = arm.MassMatrix(q) * qdd + arm.Bias(q, qd);
    EXPECT_LT((s.torque - u).cwiseAbs().maxCoeff(), 1e-6 * (1.0 + u.cwiseAbs().maxCoeff()));
    EXPECT_EQ(s.force, Vector3d::Zero());
  }
}

TEST(OscSolveTest, TorqueLimitsBindAndAreReported) {
  std::vector<Link> links = BuiltinTestArm().links();
  links[1].torque_limit = 1.0;
  const ManipulatorModel arm(links, Vector3d(0.5, 0, 0));
  const VectorXd q = BuiltinArmInverseKinematics(Vector3d(0.55, 0.0, 0.45));
  const OscSolution s = OscSolve(arm, q, VectorXd::Zero(3), HoldProblem(arm, q, Vector3d(0, 0, 9.81), 10.0), 0.0);
  ASSERT_TRUE(s.ok);
  EXPECT_LE(std::abs(s.torque(1)), 1.0 + 1e-9);
  ASSERT_FALSE(s.binding_joints.empty());
  EXPECT_EQ(s.binding_joints.front(), 1);
  EXPECT_LT(s.dynamics_residual, 1e-8);
}

// Forward-dynamics rollout under OSC torques plus an external tool force.
VectorXd Rollout(const ManipulatorModel& arm, VectorXd q, const OscProblem& prob,
                 const Vector3d& external, double duration, VectorXd* qd_out = nullptr) {
  VectorXd qd = VectorXd::Zero(arm.num_joints());
  const double dt = 1e-3;
  for (double t = 0.0; t < duration; t += dt) {
    const OscSolution s = OscSolve(arm, q, qd, prob, t);
    const MatrixXd J = arm.ToolKinematics(q, qd).jacobian.topRows<3>();
    const VectorXd qdd =
        arm.MassMatrix(q).ldlt().solve(s.torque - arm.Bias(q, qd) + J.transpose() * external);
    qd += dt * qdd;
    q += dt * qd;
  }
  if (qd_out) *qd_out = qd;
  return q;
}

TEST(OscSolveTest, PostureObjectiveRegulatesJointInFreeSpace) {
  const ManipulatorModel arm = BuiltinTestArm();
  OscProblem prob;
  TaskSpaceObjective posture = HoldProblem(arm, VectorXd::Zero(3), Vector3d::Zero(), 0.0).objectives[1];
  posture.reference = [](double) {
    return Reference{VectorXd::Constant(1, -0.9), VectorXd::Zero(1), VectorXd::Zero(1)};
  };
  posture.weights = VectorXd::Ones(1);
  prob.objectives.push_back(posture);
  prob.force_weight.setZero();
  prob.regularization = 1e-6;
  VectorXd q = BuiltinArmInverseKinematics(Vector3d(0.55, 0.0, 0.45));
  q = Rollout(arm, q, prob, Vector3d::Zero(), 3.0);
  EXPECT_NEAR(q(1), -0.9, 1e-4);
}

TEST(OscSolveTest, SagWithoutForceTargetFollowsImpedance) {
  const ManipulatorModel arm = BuiltinTestArm();
  const VectorXd q0 = BuiltinArmInverseKinematics(Vector3d(0.55, 0.0, 0.45));
  const Vector3d load(0.0, 0.0, -9.81);
  const OscProblem prob = HoldProblem(arm, q0, Vector3d::Zero(), 0.0);
  const VectorXd q = Rollout(arm, q0, prob, load, 3.0);
  const double sag = arm.ToolKinematics(q0, VectorXd::Zero(3)).position.z() -
                     arm.ToolKinematics(q, VectorXd::Zero(3)).position.z();
  // K_p is an acceleration gain: the load displaces the tool by Λ⁻¹f / K_p,
  // with Λ⁻¹ = J M⁻¹ Jᵀ the inverse task-space inertia.
  const MatrixXd J = arm.ToolKinematics(q0, VectorXd::Zero(3)).jacobian.topRows<3>();
  const Vector3d predicted = J * arm.MassMatrix(q0).ldlt().solve(J.transpose() * -load) / 400.0;
  EXPECT_GT(sag, 0.0);
  EXPECT_NEAR(sag, predicted.z(), 0.1 * predicted.z());
  // With the force target the load is compensated.
  const OscProblem comp = HoldProblem(arm, q0, -load, 10.0);
  const VectorXd qc = Rollout(arm, q0, comp, load, 3.0);
  EXPECT_LT((arm.ToolKinematics(qc, VectorXd::Zero(3)).position -
             arm.ToolKinematics(q0, VectorXd::Zero(3)).position).norm(),
            1e-4);
}

TEST(OscSolveTest, RunsFasterThanOneKilohertz) {
  const ManipulatorModel arm = BuiltinTestArm();
  const VectorXd q = BuiltinArmInverseKinematics(Vector3d(0.55, 0.0, 0.45));
  const OscProblem prob = HoldProblem(arm, q, Vector3d(0, 0, 9.81), 10.0);
  const int n = 2000;
  const auto start = std::chrono::steady_clock::now();
  for (int i = 0; i < n; ++i) OscSolve(arm, q, VectorXd::Zero(3), prob, 1e-3 * i);
  const double per = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() / n;
  EXPECT_LT(per, 1e-3);
}

}  // namespace
