#include "onpalm/scenario/dynamics.h"

#include <cmath>
#include <sstream>

#include <unsupported/Eigen/AutoDiff>

namespace onpalm {
namespace scenario {

using Eigen::Matrix3d;
using Eigen::MatrixXd;
using Eigen::Vector3d;
using Eigen::VectorXd;

SmoothParams SmoothParams::FromConfig(const ScenarioConfig& cfg) {
  SmoothParams p;
  p.ee_mass = cfg.ee.mass;
  p.tray_mass = cfg.tray.mass;
  p.tray_inertia = cfg.tray.Inertia();
  p.gravity = cfg.gravity;
  return p;
}

namespace {

// G(q) with q̇ = ½ G(q) ω for world-frame ω.
Eigen::Matrix<double, 4, 3> QuatRateMatrix(const VectorXd& x) {
  const double w = x(kTrayQuat), a = x(kTrayQuat + 1), b = x(kTrayQuat + 2),
               c = x(kTrayQuat + 3);
  Eigen::Matrix<double, 4, 3> G;
  G << -a, -b, -c,
       w, c, -b,
       -c, w, a,
       b, -a, w;
  return G;
}

Matrix3d WorldInertia(const ScenarioConfig& cfg, const VectorXd& x) {
  const Matrix3d R = TrayQuaternion(x).normalized().toRotationMatrix();
  return R * cfg.tray.Inertia() * R.transpose();
}

std::string DumpState(const VectorXd& x) {
  std::ostringstream os;
  os.precision(17);
  os << "[";
  for (int i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x(i);
  os << "]";
  return os.str();
}

}  // namespace

MatrixXd KinematicMap(const VectorXd& x) {
  MatrixXd N = MatrixXd::Zero(kNumPositions, kNumVelocities);
  N.block<3, 3>(kEePos, kVEe).setIdentity();
  N.block<4, 3>(kTrayQuat, kVOmega) = 0.5 * QuatRateMatrix(x);
  N.block<3, 3>(kTrayPos, kVTray).setIdentity();
  return N;
}

MatrixXd KinematicMapInverse(const VectorXd& x) {
  MatrixXd N = MatrixXd::Zero(kNumVelocities, kNumPositions);
  N.block<3, 3>(kVEe, kEePos).setIdentity();
  N.block<3, 4>(kVOmega, kTrayQuat) = 2.0 * QuatRateMatrix(x).transpose();
  N.block<3, 3>(kVTray, kTrayPos).setIdentity();
  return N;
}

MatrixXd InverseMassMatrix(const ScenarioConfig& cfg, const VectorXd& x) {
  MatrixXd Minv = MatrixXd::Zero(kNumVelocities, kNumVelocities);
  Minv.block<3, 3>(kVEe, kVEe) = Matrix3d::Identity() / cfg.ee.mass;
  Minv.block<3, 3>(kVOmega, kVOmega) = WorldInertia(cfg, x).inverse();
  Minv.block<3, 3>(kVTray, kVTray) = Matrix3d::Identity() / cfg.tray.mass;
  return Minv;
}

lcs::Lcs LinearizeDynamics(const ScenarioConfig& cfg, const VectorXd& x, const VectorXd& u,
                           double dt, FrictionSource friction,
                           std::vector<Contact>* contacts_out) {
  if (x.size() != kNumStates || u.size() != kNumInputs) {
    throw std::invalid_argument("linearize: state must have 19 and input 3 entries");
  }
  if (!(dt > 0.0)) throw std::invalid_argument("linearize: dt must be positive");
  constexpr int kNz = kNumStates + kNumInputs;
  using Deriv = Eigen::Matrix<double, kNz, 1>;
  using AD = Eigen::AutoDiffScalar<Deriv>;
  Eigen::Matrix<AD, kNumStates, 1> xa;
  Eigen::Matrix<AD, kNumInputs, 1> ua;
  for (int i = 0; i < kNumStates; ++i) xa(i) = AD(x(i), kNz, i);
  for (int i = 0; i < kNumInputs; ++i) ua(i) = AD(u(i), kNz, kNumStates + i);
  const SmoothParams sp = SmoothParams::FromConfig(cfg);
  const Eigen::Matrix<AD, kNumStates, 1> fa = SmoothStep<AD>(sp, xa, ua, dt);

  const std::vector<Contact> contacts = ComputeContacts(cfg, x, friction);
  const int nl = 4 * static_cast<int>(contacts.size());
  lcs::Lcs m(kNumStates, kNumInputs, nl, dt);
  VectorXd f0(kNumStates);
  for (int i = 0; i < kNumStates; ++i) {
    f0(i) = fa(i).value();
    m.A.row(i) = fa(i).derivatives().head<kNumStates>().transpose();
    m.B.row(i) = fa(i).derivatives().tail<kNumInputs>().transpose();
  }
  m.d = f0 - m.A * x - m.B * u;

  MatrixXd R;
  VectorXd gap;
  StackRays(x, contacts, R, gap);
  const MatrixXd Dv = dt * InverseMassMatrix(cfg, x) * R.transpose();
  m.D.bottomRows(kNumVelocities) = Dv;
  m.D.topRows(kNumPositions) = dt * KinematicMap(x) * Dv;

  const MatrixXd Av = m.A.bottomRows(kNumVelocities);
  const MatrixXd Bv = m.B.bottomRows(kNumVelocities);
  const VectorXd dv = m.d.tail(kNumVelocities);
  const MatrixXd Ninv = KinematicMapInverse(x);
  MatrixXd Eq(nl, kNumPositions);
  for (size_t c = 0; c < contacts.size(); ++c) {
    const Eigen::RowVectorXd jn = ContactJacobian(x, contacts[c]).row(0);
    const Eigen::RowVectorXd row = jn * Ninv / dt;
    for (int r = 0; r < 4; ++r) Eq.row(4 * c + r) = row;
  }
  m.E = R * Av;
  m.E.leftCols(kNumPositions) += Eq;
  m.F = R * Dv;
  m.H = R * Bv;
  m.c = gap / dt - Eq * x.head(kNumPositions) + R * dv;
  if (contacts_out != nullptr) *contacts_out = contacts;
  return m;
}

GroundTruthResult GroundTruthStepCoupled(const ScenarioConfig& cfg, const VectorXd& x,
                                         const RobotBody& robot, double dt,
                                         const GroundTruthOptions& opts,
                                         const VectorXd* lambda_warm) {
  if (!(dt > 0.0) || dt > 2e-3 + 1e-12) {
    throw std::invalid_argument("ground truth step needs 0 < fine_dt <= 2 ms");
  }
  if (!x.allFinite()) throw SimulationFault("non-finite state " + DumpState(x));
  const int k = static_cast<int>(robot.velocity.size());
  const Matrix3d Iw = WorldInertia(cfg, x);
  const Matrix3d Iw_inv = Iw.inverse();

  // Free velocities.
  const VectorXd vr_free = robot.velocity + dt * robot.mass.ldlt().solve(robot.force);
  const Vector3d omega = x.segment<3>(kTrayOmega);
  const Vector3d om_free = omega - dt * Iw_inv * omega.cross(Iw * omega);
  Vector3d vt_free = x.segment<3>(kTrayVel);
  vt_free.z() -= dt * cfg.gravity;

  GroundTruthResult out;
  out.contacts = ComputeContacts(cfg, x, FrictionSource::kMeasured);
  const int nc = static_cast<int>(out.contacts.size());
  out.lambda = VectorXd::Zero(4 * nc);
  std::vector<int> active;
  for (int c = 0; c < nc; ++c) {
    if (out.contacts[c].phi < opts.prefilter_gap) active.push_back(c);
  }
  const int na = static_cast<int>(active.size());
  const int ng = k + 6;
  MatrixXd G = MatrixXd::Zero(4 * na, ng);
  VectorXd gap(4 * na);
  for (int i = 0; i < na; ++i) {
    const Contact& ct = out.contacts[active[i]];
    const RayRows rays = AnitescuRays(ContactJacobian(x, ct), ct.mu);
    G.block(4 * i, 0, 4, k) = rays.middleCols<3>(kVEe) * robot.ee_jacobian;
    G.block(4 * i, k, 4, 3) = rays.middleCols<3>(kVOmega);
    G.block(4 * i, k + 3, 4, 3) = rays.middleCols<3>(kVTray);
    gap.segment<4>(4 * i).setConstant(ct.phi);
  }
  VectorXd v_free(ng);
  v_free << vr_free, om_free, vt_free;
  MatrixXd Minv = MatrixXd::Zero(ng, ng);
  Minv.topLeftCorner(k, k) = robot.mass.inverse();
  Minv.block<3, 3>(k, k) = Iw_inv;
  Minv.block<3, 3>(k + 3, k + 3) = Matrix3d::Identity() / cfg.tray.mass;

  VectorXd v_next = v_free;
  if (na > 0) {
    numopt::LinCompProblem lcp{dt * G * Minv * G.transpose(), G * v_free + gap / dt};
    VectorXd warm;
    if (lambda_warm != nullptr && lambda_warm->size() == 4 * nc) {
      warm.resize(4 * na);
      for (int i = 0; i < na; ++i) warm.segment<4>(4 * i) = lambda_warm->segment<4>(4 * active[i]);
    }
    const numopt::LcpResult r = numopt::SolveLcp(lcp, numopt::LcpMethod::kIterative, opts.lcp,
                                                 warm.size() ? &warm : nullptr);
    if (r.status != numopt::LcpStatus::kSolved) {
      std::ostringstream os;
      os << "contact LCP failed (residual " << r.residual << ") at state " << DumpState(x);
      throw SimulationFault(os.str());
    }
    out.lcp_residual = r.residual;
    for (int i = 0; i < na; ++i) out.lambda.segment<4>(4 * active[i]) = r.lambda.segment<4>(4 * i);
    v_next += dt * Minv * G.transpose() * r.lambda;
  }
  out.robot_velocity = v_next.head(k);

  VectorXd xn = x;
  const Vector3d v_ee = robot.ee_jacobian * out.robot_velocity;
  xn.segment<3>(kEeVel) = v_ee;
  xn.segment<3>(kEePos) += dt * v_ee;
  const Vector3d om = v_next.segment<3>(k);
  const Vector3d vt = v_next.segment<3>(k + 3);
  xn.segment<3>(kTrayOmega) = om;
  xn.segment<3>(kTrayVel) = vt;
  xn.segment<3>(kTrayPos) += dt * vt;
  Eigen::Vector4d q = x.segment<4>(kTrayQuat);
  q += 0.5 * dt * QuatRateMatrix(x) * om;
  xn.segment<4>(kTrayQuat) = q.normalized();
  if (!xn.allFinite()) throw SimulationFault("non-finite state after step from " + DumpState(x));
  out.x_next = xn;
  return out;
}

GroundTruthResult GroundTruthStep(const ScenarioConfig& cfg, const VectorXd& x,
                                  const VectorXd& ee_force, double fine_dt,
                                  const GroundTruthOptions& opts, const VectorXd* lambda_warm) {
  if (ee_force.size() != 3) throw std::invalid_argument("ee force must have 3 entries");
  RobotBody ee;
  ee.mass = (cfg.ee.mass + opts.ee_extra_mass) * Matrix3d::Identity();
  ee.velocity = x.segment<3>(kEeVel);
  ee.force = ee_force;
  ee.ee_jacobian = Matrix3d::Identity();
  return GroundTruthStepCoupled(cfg, x, ee, fine_dt, opts, lambda_warm);
}

double MechanicalEnergy(const ScenarioConfig& cfg, const VectorXd& x) {
  const Vector3d om = x.segment<3>(kTrayOmega);
  const double ke = 0.5 * cfg.ee.mass * x.segment<3>(kEeVel).squaredNorm() +
                    0.5 * cfg.tray.mass * x.segment<3>(kTrayVel).squaredNorm() +
                    0.5 * om.dot(WorldInertia(cfg, x) * om);
  return ke + cfg.tray.mass * cfg.gravity * x(kTrayPos + 2);
}

}  // namespace scenario
}  // namespace onpalm

namespace onpalm {
namespace scenario {

Eigen::VectorXd RestingTrayState(const ScenarioConfig& cfg) {
  double top = 0.485 - 0.5 * cfg.tray.height;
  if (!cfg.supports.empty()) top = cfg.supports.front().start.z();
  const Vector3d tray(0.7, 0.0, top + 0.5 * cfg.tray.height);
  return MakeState(Vector3d(0.55, 0.0, 0.30), tray);
}

void TiltSupports(double angle, ScenarioConfig& cfg, Eigen::VectorXd& x) {
  const Eigen::AngleAxisd rot(angle, Vector3d::UnitY());
  const Vector3d tray = x.segment<3>(kTrayPos);
  const Vector3d pivot(tray.x(), tray.y(), tray.z() - 0.5 * cfg.tray.height);
  for (SupportSegment& s : cfg.supports) {
    s.start = pivot + rot * (s.start - pivot);
    s.end = pivot + rot * (s.end - pivot);
  }
  x.segment<3>(kTrayPos) = pivot + rot * (tray - pivot);
  SetTrayQuaternion(x, Eigen::Quaterniond(rot) * TrayQuaternion(x));
}

}  // namespace scenario
}  // namespace onpalm
