#include "onpalm/osc/osc.h"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "onpalm/numopt/dense_qp.h"

namespace onpalm {
namespace osc {

using Eigen::Matrix3d;
using Eigen::MatrixXd;
using Eigen::Vector3d;
using Eigen::VectorXd;

namespace {

struct ChainPose {
  std::vector<Matrix3d> R;
  std::vector<Vector3d> p;
  std::vector<Vector3d> z;
  Vector3d tool;
};

ChainPose Pose(const std::vector<Link>& links, const Vector3d& tool_offset, const VectorXd& q) {
  const int n = static_cast<int>(links.size());
  ChainPose out;
  out.R.resize(n);
  out.p.resize(n);
  out.z.resize(n);
  Matrix3d R = Matrix3d::Identity();
  Vector3d p = Vector3d::Zero();
  for (int i = 0; i < n; ++i) {
    p = p + R * links[i].offset;
    out.z[i] = R * links[i].axis;
    R = R * Eigen::AngleAxisd(q(i), links[i].axis).toRotationMatrix();
    out.R[i] = R;
    out.p[i] = p;
  }
  out.tool = p + R * tool_offset;
  return out;
}

Matrix3d Skew(const Vector3d& v) {
  Matrix3d s;
  s << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return s;
}

}  // namespace

ManipulatorModel::ManipulatorModel(std::vector<Link> links, Vector3d tool_offset, double gravity)
    : links_(std::move(links)), tool_offset_(std::move(tool_offset)), gravity_(gravity) {
  if (links_.empty()) throw std::invalid_argument("manipulator needs at least one joint");
  for (Link& l : links_) l.axis.normalize();
}

VectorXd ManipulatorModel::TorqueLimits() const {
  VectorXd t(num_joints());
  for (int i = 0; i < num_joints(); ++i) t(i) = links_[i].torque_limit;
  return t;
}

void ManipulatorModel::AddToolMass(double mass) {
  Link& l = links_.back();
  const double total = l.mass + mass;
  const Vector3d com = (l.mass * l.com + mass * tool_offset_) / total;
  // Parallel-axis shift of both bodies to the combined center.
  auto shift = [](double m, const Vector3d& d) {
    return m * (d.squaredNorm() * Matrix3d::Identity() - d * d.transpose());
  };
  l.inertia = l.inertia + shift(l.mass, l.com - com) + shift(mass, tool_offset_ - com);
  l.com = com;
  l.mass = total;
}

VectorXd ManipulatorModel::Rnea(const VectorXd& q, const VectorXd& qd, const VectorXd& qdd,
                                double gravity) const {
  const int n = num_joints();
  const ChainPose pose = Pose(links_, tool_offset_, q);
  std::vector<Vector3d> w(n), wd(n), ac(n), c(n);
  Vector3d w_prev = Vector3d::Zero(), wd_prev = Vector3d::Zero();
  // Gravity enters as an upward base acceleration.
  Vector3d a_prev(0.0, 0.0, gravity);
  Vector3d p_prev = Vector3d::Zero();
  for (int i = 0; i < n; ++i) {
    const Vector3d r = pose.p[i] - p_prev;
    const Vector3d a_i = a_prev + wd_prev.cross(r) + w_prev.cross(w_prev.cross(r));
    const Vector3d zq = pose.z[i] * qd(i);
    w[i] = w_prev + zq;
    wd[i] = wd_prev + pose.z[i] * qdd(i) + w_prev.cross(zq);
    c[i] = pose.R[i] * links_[i].com;
    ac[i] = a_i + wd[i].cross(c[i]) + w[i].cross(w[i].cross(c[i]));
    w_prev = w[i];
    wd_prev = wd[i];
    a_prev = a_i;
    p_prev = pose.p[i];
  }
  VectorXd tau(n);
  Vector3d f_next = Vector3d::Zero(), n_next = Vector3d::Zero();
  for (int i = n - 1; i >= 0; --i) {
    const Link& l = links_[i];
    const Matrix3d Iw = pose.R[i] * l.inertia * pose.R[i].transpose();
    const Vector3d F = l.mass * ac[i];
    const Vector3d N = Iw * wd[i] + w[i].cross(Iw * w[i]);
    const Vector3d r_next = i + 1 < n ? Vector3d(pose.p[i + 1] - pose.p[i]) : Vector3d::Zero();
    const Vector3d f = F + f_next;
    const Vector3d m = N + c[i].cross(F) + n_next + r_next.cross(f_next);
    tau(i) = pose.z[i].dot(m) + l.armature * qdd(i);
    f_next = f;
    n_next = m;
  }
  return tau;
}

Kinematics ManipulatorModel::ToolKinematics(const VectorXd& q, const VectorXd& qd) const {
  const int n = num_joints();
  const ChainPose pose = Pose(links_, tool_offset_, q);
  Kinematics k;
  k.position = pose.tool;
  k.rotation = pose.R.back();
  k.jacobian = MatrixXd::Zero(6, n);
  for (int i = 0; i < n; ++i) {
    k.jacobian.block<3, 1>(0, i) = pose.z[i].cross(pose.tool - pose.p[i]);
    k.jacobian.block<3, 1>(3, i) = pose.z[i];
  }
  // Tool acceleration at q̈ = 0 without gravity.
  Vector3d w = Vector3d::Zero(), wd = Vector3d::Zero(), a = Vector3d::Zero();
  Vector3d p_prev = Vector3d::Zero();
  for (int i = 0; i < n; ++i) {
    const Vector3d r = pose.p[i] - p_prev;
    a = a + wd.cross(r) + w.cross(w.cross(r));
    const Vector3d zq = pose.z[i] * qd(i);
    wd = wd + w.cross(zq);
    w = w + zq;
    p_prev = pose.p[i];
  }
  const Vector3d r = pose.tool - p_prev;
  k.bias_acceleration.resize(6);
  k.bias_acceleration.head<3>() = a + wd.cross(r) + w.cross(w.cross(r));
  k.bias_acceleration.tail<3>() = wd;
  return k;
}

MatrixXd ManipulatorModel::MassMatrix(const VectorXd& q) const {
  const int n = num_joints();
  MatrixXd M(n, n);
  const VectorXd zero = VectorXd::Zero(n);
  for (int j = 0; j < n; ++j) M.col(j) = Rnea(q, zero, VectorXd::Unit(n, j), 0.0);
  return 0.5 * (M + M.transpose());
}

VectorXd ManipulatorModel::Bias(const VectorXd& q, const VectorXd& qd) const {
  return Rnea(q, qd, VectorXd::Zero(num_joints()), gravity_);
}

VectorXd ManipulatorModel::InverseDynamics(const VectorXd& q, const VectorXd& qd,
                                           const VectorXd& qdd, const Vector3d& tool_force) const {
  const MatrixXd J = ToolKinematics(q, qd).jacobian.topRows<3>();
  return Rnea(q, qd, qdd, gravity_) + J.transpose() * tool_force;
}

ManipulatorModel BuiltinTestArm() {
  auto rod = [](double m, double len) {
    Matrix3d I = Matrix3d::Zero();
    I(0, 0) = 1e-3 * m;
    I(1, 1) = I(2, 2) = m * len * len / 12.0;
    return I;
  };
  std::vector<Link> links(3);
  links[0].offset = Vector3d(0.0, 0.0, 0.35);
  links[0].axis = Vector3d::UnitZ();
  links[0].mass = 3.0;
  links[0].inertia = 0.02 * Matrix3d::Identity();
  links[0].armature = 0.05;
  links[0].torque_limit = 87.0;
  links[1].axis = Vector3d::UnitY();
  links[1].mass = 2.0;
  links[1].com = Vector3d(0.25, 0.0, 0.0);
  links[1].inertia = rod(2.0, 0.5);
  links[1].armature = 0.05;
  links[1].torque_limit = 87.0;
  links[2].offset = Vector3d(0.5, 0.0, 0.0);
  links[2].axis = Vector3d::UnitY();
  links[2].mass = 1.5;
  links[2].com = Vector3d(0.25, 0.0, 0.0);
  links[2].inertia = rod(1.5, 0.5);
  links[2].armature = 0.05;
  links[2].torque_limit = 40.0;
  return ManipulatorModel(std::move(links), Vector3d(0.5, 0.0, 0.0));
}

ManipulatorModel PlanarTwoLink(double l1, double l2, double m1, double m2, double lc1,
                               double lc2, double i1, double i2, double gravity) {
  std::vector<Link> links(2);
  for (Link& l : links) l.axis = Vector3d::UnitY();
  links[0].mass = m1;
  links[0].com = Vector3d(lc1, 0.0, 0.0);
  links[0].inertia = Eigen::Vector3d(0.0, i1, 0.0).asDiagonal();
  links[1].offset = Vector3d(l1, 0.0, 0.0);
  links[1].mass = m2;
  links[1].com = Vector3d(lc2, 0.0, 0.0);
  links[1].inertia = Eigen::Vector3d(0.0, i2, 0.0).asDiagonal();
  return ManipulatorModel(std::move(links), Vector3d(l2, 0.0, 0.0), gravity);
}

VectorXd BuiltinArmInverseKinematics(const Vector3d& p) {
  const double l1 = 0.5, l2 = 0.5;
  const double yaw = std::atan2(p.y(), p.x());
  const double r = std::hypot(p.x(), p.y());
  const double h = p.z() - 0.35;
  const double d2 = r * r + h * h;
  double c2 = (d2 - l1 * l1 - l2 * l2) / (2.0 * l1 * l2);
  c2 = std::clamp(c2, -1.0, 1.0);
  // Elevation angles (positive up); the elbow sits above the shoulder–tool line.
  const double t2 = -std::acos(c2);
  const double t1 = std::atan2(h, r) - std::atan2(l2 * std::sin(t2), l1 + l2 * std::cos(t2));
  VectorXd q(3);
  q << yaw, -t1, -t2;
  return q;
}

VectorXd TaskSpaceAccCmd(const TaskSpaceObjective& obj, double t, const VectorXd& y,
                         const VectorXd& yd) {
  const Reference ref = obj.reference(t);
  return ref.ydd + obj.kp * (ref.y - y) + obj.kd * (ref.yd - yd);
}

TaskMap ToolPositionMap(const ManipulatorModel& m, const VectorXd& q, const VectorXd& qd) {
  const Kinematics k = m.ToolKinematics(q, qd);
  return {k.position, k.jacobian.topRows<3>(), k.bias_acceleration.head<3>()};
}

TaskMap JointMap(int joint, const ManipulatorModel& m, const VectorXd& q, const VectorXd&) {
  TaskMap t;
  t.y = VectorXd::Constant(1, q(joint));
  t.jacobian = MatrixXd::Zero(1, m.num_joints());
  t.jacobian(0, joint) = 1.0;
  t.bias = VectorXd::Zero(1);
  return t;
}

TaskMap ToolAxisMap(const ManipulatorModel& m, const VectorXd& q, const VectorXd& qd) {
  const Kinematics k = m.ToolKinematics(q, qd);
  const Vector3d a = k.rotation.col(2);
  const Vector3d w = k.jacobian.bottomRows<3>() * qd;
  const Vector3d wd_bias = k.bias_acceleration.tail<3>();
  TaskMap t;
  t.y = a.head<2>();
  t.jacobian = (-Skew(a) * k.jacobian.bottomRows<3>()).topRows<2>();
  t.bias = (wd_bias.cross(a) + w.cross(w.cross(a))).head<2>();
  return t;
}

OscSolution OscSolve(const ManipulatorModel& model, const VectorXd& q, const VectorXd& qd,
                     const OscProblem& problem, double t) {
  if (problem.objectives.empty()) throw std::invalid_argument("OSC needs at least one objective");
  const int n = model.num_joints();
  const bool with_force = (problem.force_weight.array() > 0.0).any();
  const int nl = with_force ? 3 : 0;
  const int nv = n + nl;
  const MatrixXd M = model.MassMatrix(q);
  const VectorXd C = model.Bias(q, qd);
  const MatrixXd J = model.ToolKinematics(q, qd).jacobian.topRows<3>();

  MatrixXd H = MatrixXd::Zero(nv, nv);
  VectorXd g = VectorXd::Zero(nv);
  H.topLeftCorner(n, n).diagonal().setConstant(problem.regularization);
  for (const TaskSpaceObjective& obj : problem.objectives) {
    const TaskMap tm = obj.map(model, q, qd);
    const VectorXd acc = TaskSpaceAccCmd(obj, t, tm.y, tm.jacobian * qd);
    const MatrixXd JW = tm.jacobian.transpose() * obj.weights.asDiagonal();
    H.topLeftCorner(n, n) += JW * tm.jacobian;
    g.head(n) += JW * (tm.bias - acc);
  }
  Vector3d lambda_des = Vector3d::Zero();
  if (with_force) {
    lambda_des = problem.force_target ? problem.force_target(t) : Vector3d::Zero();
    H.bottomRightCorner<3, 3>() = problem.force_weight.asDiagonal();
    g.tail<3>() = -problem.force_weight.cwiseProduct(lambda_des);
  }
  // u = M q̈ + C + Jᵀλ, bounded by the torque limits.
  MatrixXd U(n, nv);
  U.leftCols(n) = M;
  if (with_force) U.rightCols<3>() = J.transpose();
  const VectorXd lim = model.TorqueLimits();
  MatrixXd Ci(2 * n, nv);
  VectorXd bi(2 * n);
  Ci << U, -U;
  bi << -lim - C, -lim + C;

  OscSolution out;
  const numopt::DenseQpResult r = numopt::SolveDenseStrictlyConvexQp(
      2.0 * H, 2.0 * g, MatrixXd(0, nv), VectorXd(0), Ci, bi);
  if (r.status != numopt::DenseQpResult::Status::kSolved) {
    // Report the joints whose bias alone exceeds their limit, else all.
    std::ostringstream os;
    os << "torque limits exclude every solution; binding joints:";
    for (int i = 0; i < n; ++i) {
      if (std::abs(C(i)) >= lim(i)) {
        out.binding_joints.push_back(i);
        os << ' ' << i;
      }
    }
    if (out.binding_joints.empty()) {
      for (int i = 0; i < n; ++i) out.binding_joints.push_back(i);
      os << " all";
    }
    out.error = os.str();
    return out;
  }
  out.ok = true;
  out.qdd = r.x.head(n);
  if (with_force) out.force = r.x.tail<3>();
  out.torque = U * r.x + C;
  for (int i = 0; i < n; ++i) {
    if (std::abs(std::abs(out.torque(i)) - lim(i)) <= 1e-9 * (1.0 + lim(i))) {
      out.binding_joints.push_back(i);
    }
  }
  out.torque = out.torque.cwiseMax(-lim).cwiseMin(lim);
  out.dynamics_residual =
      (M * out.qdd + C - out.torque + J.transpose() * out.force).cwiseAbs().maxCoeff();
  return out;
}

OscProblem BuiltinArmProblem(const OscParams& params, std::function<Reference(double)> position,
                             std::function<Vector3d(double)> force_target) {
  OscProblem p;
  TaskSpaceObjective pos;
  pos.name = "tool_position";
  pos.map = ToolPositionMap;
  pos.reference = std::move(position);
  pos.weights = VectorXd::Constant(3, params.position_weight);
  pos.kp = params.kp;
  pos.kd = params.kd;
  p.objectives.push_back(std::move(pos));

  TaskSpaceObjective posture;
  posture.name = "joint1_posture";
  posture.map = [](const ManipulatorModel& m, const VectorXd& q, const VectorXd& qd) {
    return JointMap(1, m, q, qd);
  };
  const double target = params.posture_target;
  posture.reference = [target](double) {
    return Reference{VectorXd::Constant(1, target), VectorXd::Zero(1), VectorXd::Zero(1)};
  };
  posture.weights = VectorXd::Constant(1, params.posture_weight);
  posture.kp = params.posture_kp;
  posture.kd = params.posture_kd;
  p.objectives.push_back(std::move(posture));

  if (params.tool_axis_weight > 0.0) {
    TaskSpaceObjective axis;
    axis.name = "tool_axis";
    axis.map = ToolAxisMap;
    axis.reference = [](double) {
      return Reference{VectorXd::Zero(2), VectorXd::Zero(2), VectorXd::Zero(2)};
    };
    axis.weights = VectorXd::Constant(2, params.tool_axis_weight);
    axis.kp = params.kp;
    axis.kd = params.kd;
    p.objectives.push_back(std::move(axis));
  }
  p.force_target = std::move(force_target);
  p.force_weight = Vector3d::Constant(params.force_objective ? params.force_weight : 0.0);
  return p;
}

}  // namespace osc
}  // namespace onpalm
