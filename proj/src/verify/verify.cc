#include "onpalm/verify/verify.h"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>

#include <Eigen/Dense>

#include "onpalm/numopt/lcp_solver.h"
#include "onpalm/numopt/miqp_projection.h"
#include "onpalm/osc/osc.h"
#include "onpalm/scenario/contacts.h"
#include "onpalm/scenario/dynamics.h"
#include "onpalm/scenario/state.h"
#include "onpalm/verify/problems.h"

namespace onpalm {
namespace verify {

using Eigen::MatrixXd;
using Eigen::Quaterniond;
using Eigen::Vector3d;
using Eigen::VectorXd;
using namespace scenario;

namespace {

class Timer {
 public:
  double Seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

int Cases(const SuiteOptions& opts, int full) { return opts.quick ? std::max(1, full / 5) : full; }

void Fail(SuiteResult& r, const std::string& what) {
  if (r.passed) r.detail = what;
  r.passed = false;
}

std::string Fmt(const char* fmt, double a, double b = 0.0) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), fmt, a, b);
  return buf;
}

// Both bodies far from every contact.
VectorXd FreeState(std::mt19937& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const Quaterniond q(Eigen::AngleAxisd(0.5 * u(rng), Vector3d(u(rng), u(rng), 1).normalized()));
  VectorXd x = MakeState(Vector3d(0.3, 0.0, 0.1), Vector3d(0.7, 0.0, 1.2), q);
  for (int i = kEeVel; i < kNumStates; ++i) x(i) = 0.5 * u(rng);
  return x;
}

// Worst relative error of A and B against central differences of the
// ground-truth step. Quaternion perturbations stay tangent to the unit
// sphere so the simulator's renormalization is first-order inert.
double JacobianError(const ScenarioConfig& cfg, const VectorXd& x, const Vector3d& u, double dt) {
  const lcs::Lcs m = LinearizeDynamics(cfg, x, u, dt);
  auto step = [&](const VectorXd& xs, const Vector3d& us) {
    return GroundTruthStep(cfg, xs, us, dt).x_next;
  };
  const double h = 1e-6;
  MatrixXd dirs = MatrixXd::Identity(kNumStates, kNumStates);
  const Eigen::Vector4d q = x.segment<4>(kTrayQuat);
  for (int j = 0; j < 4; ++j) {
    const Eigen::Vector4d e = Eigen::Vector4d::Unit(j);
    dirs.col(kTrayQuat + j).segment<4>(kTrayQuat) = e - e.dot(q) * q;
  }
  const Eigen::Vector4d qn = step(x, u).segment<4>(kTrayQuat);
  double worst = 0.0;
  for (int j = 0; j < kNumStates; ++j) {
    const VectorXd e = dirs.col(j);
    const VectorXd fd = (step(x + h * e, u) - step(x - h * e, u)) / (2.0 * h);
    VectorXd lin = m.A * e;
    lin.segment<4>(kTrayQuat) -= lin.segment<4>(kTrayQuat).dot(qn) * qn;
    worst = std::max(worst, (fd - lin).norm() / std::max(1.0, lin.norm()));
  }
  for (int j = 0; j < kNumInputs; ++j) {
    const Vector3d e = Vector3d::Unit(j);
    const VectorXd fd = (step(x, u + h * e) - step(x, u - h * e)) / (2.0 * h);
    const VectorXd lin = m.B * e;
    worst = std::max(worst, (fd - lin).norm() / std::max(1e-3, lin.norm()));
  }
  return worst;
}

// One LCS step against exact free flight (ballistic translation, spin about
// the tray's symmetry axis).
double OneStepError(const ScenarioConfig& cfg, const VectorXd& x0, double spin, const Vector3d& u,
                    double dt) {
  VectorXd x = x0;
  SetTrayQuaternion(x, Quaterniond::Identity());
  x.segment<3>(kTrayOmega) = Vector3d(0, 0, spin);
  const lcs::Lcs m = LinearizeDynamics(cfg, x, u, dt);
  const VectorXd lin = m.A * x + m.B * u + m.d;
  VectorXd exact = x;
  const Vector3d a_ee = u / cfg.ee.mass;
  exact.segment<3>(kEePos) += dt * x.segment<3>(kEeVel) + 0.5 * dt * dt * a_ee;
  exact.segment<3>(kEeVel) += dt * a_ee;
  const Vector3d g(0, 0, -cfg.gravity);
  exact.segment<3>(kTrayPos) += dt * x.segment<3>(kTrayVel) + 0.5 * dt * dt * g;
  exact.segment<3>(kTrayVel) += dt * g;
  SetTrayQuaternion(exact, Quaterniond(Eigen::AngleAxisd(spin * dt, Vector3d::UnitZ())));
  return (lin - exact).norm();
}

// Velocity of the other body's contact point relative to the tray's
// material point, by differencing poses along N(q)·v.
Vector3d SlipByDifferences(const VectorXd& x, const Contact& c, const VectorXd& v, double eps) {
  const MatrixXd N = KinematicMap(x);
  auto local = [&](double s) {
    VectorXd xs = x;
    xs.head(kNumPositions) = x.head(kNumPositions) + s * N * v;
    const Quaterniond rot = TrayQuaternion(xs).normalized();
    Vector3d p = c.other_point;
    if (c.kind == ContactKind::kEndEffector) p += xs.segment<3>(kEePos) - x.segment<3>(kEePos);
    return Vector3d(rot.conjugate() * (p - xs.segment<3>(kTrayPos)));
  };
  return TrayQuaternion(x).normalized() * ((local(eps) - local(-eps)) / (2.0 * eps));
}

// Knot layout [x (nx), λ (m), u (nu)] with slack = E x + F λ + H u + c.
numopt::ComplementarityProjection RandomKnot(std::mt19937& rng, int nx, int m, int nu) {
  const int n = nx + m + nu;
  numopt::ComplementarityProjection p;
  p.weights.resize(n);
  p.weights << VectorXd::Constant(nx, 0.1), VectorXd::Constant(m, 10.0),
      VectorXd::Constant(nu, 3.0);
  p.target = RandomVector(rng, n);
  p.slack_matrix.resize(m, n);
  for (int i = 0; i < m; ++i) {
    p.slack_matrix.row(i).head(nx) = RandomVector(rng, nx).transpose();
    p.slack_matrix.row(i).tail(nu) = RandomVector(rng, nu).transpose();
  }
  p.slack_matrix.block(0, nx, m, m) = RandomPsd(rng, m, m) * 0.5;
  p.slack_offset = RandomVector(rng, m);
  for (int i = 0; i < m; ++i) p.force_index.push_back(nx + i);
  return p;
}

// Every fully fixed mode, each solved by brute-force active-set enumeration.
double ExhaustiveProjection(const numopt::ComplementarityProjection& p) {
  const int n = p.num_vars();
  const int m = p.num_pairs();
  const MatrixXd G = (2.0 * p.weights).asDiagonal();
  const VectorXd a = -2.0 * p.weights.cwiseProduct(p.target);
  double best = std::numeric_limits<double>::infinity();
  for (int mask = 0; mask < (1 << m); ++mask) {
    MatrixXd Ce(m, n), Ci(m, n);
    VectorXd be(m), bi(m);
    for (int i = 0; i < m; ++i) {
      const VectorXd e = VectorXd::Unit(n, p.force_index[i]);
      const VectorXd w = p.slack_matrix.row(i).transpose();
      const bool slack_zero = (mask >> i) & 1;
      Ce.row(i) = (slack_zero ? w : e).transpose();
      be(i) = slack_zero ? -p.slack_offset(i) : 0.0;
      Ci.row(i) = (slack_zero ? e : w).transpose();
      bi(i) = slack_zero ? 0.0 : -p.slack_offset(i);
    }
    VectorXd x;
    double f;
    if (!BruteForceQp(G, a, Ce, be, Ci, bi, x, f)) continue;
    best = std::min(best, (x - p.target).cwiseAbs2().dot(p.weights));
  }
  return best;
}

osc::OscProblem ArmProblem(const osc::ManipulatorModel& arm, const VectorXd& q,
                           const Vector3d& force, double force_weight) {
  osc::OscParams params;
  params.force_weight = force_weight;
  params.force_objective = force_weight > 0.0;
  params.posture_target = q(1);
  const Vector3d p = arm.ToolKinematics(q, VectorXd::Zero(3)).position;
  return osc::BuiltinArmProblem(
      params,
      [p](double) {
        return osc::Reference{p + Vector3d(0.02, -0.01, 0.03), Vector3d(0.1, 0, -0.1),
                              Vector3d(0.5, 0, 0)};
      },
      [force](double) { return force; });
}

}  // namespace

SuiteResult VerifyLcp(const SuiteOptions& opts) {
  SuiteResult r{"lcp", true, Cases(opts, 200), 0.0, 1e-6, 0.0, ""};
  const Timer timer;
  std::mt19937 rng(static_cast<unsigned>(opts.seed));
  double worst_slack = 0.0;
  for (int trial = 0; trial < r.cases; ++trial) {
    const int n = 1 + trial % 10;
    MatrixXd M;
    VectorXd q;
    RandomContactLcp(rng, n, M, q);
    const numopt::LinCompProblem p{M, q};
    const numopt::LcpResult e = numopt::SolveLcp(p, numopt::LcpMethod::kEnumerate);
    const numopt::LcpResult it = numopt::SolveLcp(p, numopt::LcpMethod::kIterative);
    if (e.status != numopt::LcpStatus::kSolved || it.status != numopt::LcpStatus::kSolved) {
      Fail(r, "case " + std::to_string(trial) + " unsolved");
      continue;
    }
    r.worst = std::max({r.worst, it.residual, e.residual});
    // For PSD M the slack is unique, so both solutions must share it.
    worst_slack = std::max(worst_slack, (e.slack - it.slack).cwiseAbs().maxCoeff());
  }
  r.seconds = timer.Seconds();
  if (r.worst > r.tolerance) Fail(r, Fmt("residual %.3g", r.worst));
  if (worst_slack > 1e-5) Fail(r, Fmt("slack mismatch %.3g", worst_slack));
  if (r.detail.empty()) r.detail = Fmt("slack_diff=%.2g", worst_slack);
  return r;
}

SuiteResult VerifyLinearization(const SuiteOptions& opts) {
  SuiteResult r{"linearization", true, Cases(opts, 50), 0.0, 1e-4, 0.0, ""};
  const Timer timer;
  const ScenarioConfig cfg = ScenarioConfig::TrayRetrieval();
  std::mt19937 rng(static_cast<unsigned>(opts.seed) + 1);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  for (int trial = 0; trial < r.cases; ++trial) {
    const VectorXd x = FreeState(rng);
    const Vector3d u(uni(rng), uni(rng), uni(rng));
    r.worst = std::max(r.worst, JacobianError(cfg, x, u, 1e-3));
  }
  if (r.worst > r.tolerance) Fail(r, Fmt("jacobian error %.3g", r.worst));
  // The one-step error is O(dt²), so halving dt should cut it about 4×.
  const VectorXd x = FreeState(rng);
  const Vector3d u(0.4, -0.2, 0.3);
  const double ratio = OneStepError(cfg, x, 2.0, u, 0.04) / OneStepError(cfg, x, 2.0, u, 0.02);
  if (!(ratio >= 3.5)) Fail(r, Fmt("one-step error ratio %.3g < 3.5", ratio));
  if (r.detail.empty()) r.detail = Fmt("halving_ratio=%.3f", ratio);
  r.seconds = timer.Seconds();
  return r;
}

SuiteResult VerifyContactJacobian(const SuiteOptions& opts) {
  SuiteResult r{"contact_jacobian", true, Cases(opts, 20), 0.0, 1e-6, 0.0, ""};
  const Timer timer;
  const ScenarioConfig cfg = ScenarioConfig::TrayRetrieval();
  std::mt19937 rng(static_cast<unsigned>(opts.seed) + 2);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < r.cases; ++trial) {
    const Quaterniond q(
        Eigen::AngleAxisd(0.3 * u(rng), Vector3d(u(rng), u(rng), 2.0).normalized()));
    const Vector3d ee(0.55, 0.0, 0.4);
    VectorXd x = MakeState(ee, ee + Vector3d(0, 0, 0.5 * cfg.ee.thickness + 0.5 * cfg.tray.height),
                           q);
    VectorXd v(kNumVelocities);
    for (int i = 0; i < kNumVelocities; ++i) v(i) = u(rng);
    // Every contact of the scenario, each with its point moved onto the tray
    // so the differenced motion is that of a touching pair.
    const auto contacts = ComputeContacts(cfg, x, FrictionSource::kModel);
    for (const Contact& c0 : contacts) {
      Contact c = c0;
      if (c.kind == ContactKind::kEndEffector) {
        VectorXd xs = x;
        xs.segment<3>(kEePos) -= c0.phi * c0.normal;
        c = ComputeContacts(cfg, xs, FrictionSource::kModel)[&c0 - contacts.data()];
        const Vector3d jv = ContactJacobian(xs, c) * v;
        const Vector3d fd = SlipByDifferences(xs, c, v, 1e-6);
        const Vector3d framed(fd.dot(c.normal), fd.dot(c.t1), fd.dot(c.t2));
        r.worst = std::max(r.worst, (jv - framed).cwiseAbs().maxCoeff() / (1.0 + v.norm()));
      }
    }
  }
  r.seconds = timer.Seconds();
  if (r.worst > r.tolerance) Fail(r, Fmt("contact Jacobian error %.3g", r.worst));
  return r;
}

SuiteResult VerifyProjection(const SuiteOptions& opts) {
  SuiteResult r{"projection", true, Cases(opts, 100), 0.0, 1e-6, 0.0, ""};
  const Timer timer;
  std::mt19937 rng(static_cast<unsigned>(opts.seed) + 3);
  numopt::ProjectionBudget unlimited;
  unlimited.max_nodes = 1 << 20;
  unlimited.time_limit = 0.0;
  for (int trial = 0; trial < r.cases; ++trial) {
    const int m = 1 + trial % 4;
    const numopt::ComplementarityProjection p = RandomKnot(rng, 4, m, 2);
    const double ref = ExhaustiveProjection(p);
    const numopt::ProjectionResult got = numopt::ProjectComplementarity(p, unlimited);
    if (!std::isfinite(ref) || got.status != numopt::ProjectionStatus::kOk) {
      Fail(r, "case " + std::to_string(trial) + " infeasible");
      continue;
    }
    r.worst = std::max(r.worst, std::abs(got.objective - ref) / (1.0 + ref));
  }
  r.seconds = timer.Seconds();
  if (r.worst > r.tolerance) Fail(r, Fmt("objective gap %.3g", r.worst));
  return r;
}

SuiteResult VerifyOsc(const SuiteOptions& opts) {
  SuiteResult r{"osc", true, Cases(opts, 20), 0.0, 1e-6, 0.0, ""};
  const Timer timer;
  const osc::ManipulatorModel arm = osc::BuiltinTestArm();
  std::mt19937 rng(static_cast<unsigned>(opts.seed) + 4);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  auto random3 = [&](double s) { return Vector3d(s * uni(rng), s * uni(rng), s * uni(rng)); };
  for (int trial = 0; trial < r.cases; ++trial) {
    const VectorXd q = osc::BuiltinArmInverseKinematics(Vector3d(0.5, 0.05, 0.5)) + random3(0.15);
    const VectorXd qd = random3(0.3);

    // Without the force term the program is weighted least squares on the
    // task accelerations followed by u = M q̈ + C.
    const osc::OscProblem plain = ArmProblem(arm, q, Vector3d(1, 2, 3), 0.0);
    const osc::OscSolution s = osc::OscSolve(arm, q, qd, plain, 0.0);
    if (!s.ok) {
      Fail(r, "case " + std::to_string(trial) + ": " + s.error);
      continue;
    }
    MatrixXd H = plain.regularization * MatrixXd::Identity(3, 3);
    VectorXd rhs = VectorXd::Zero(3);
    for (const osc::TaskSpaceObjective& obj : plain.objectives) {
      const osc::TaskMap tm = obj.map(arm, q, qd);
      const VectorXd acc = osc::TaskSpaceAccCmd(obj, 0.0, tm.y, tm.jacobian * qd);
      H += tm.jacobian.transpose() * obj.weights.asDiagonal() * tm.jacobian;
      rhs += tm.jacobian.transpose() * obj.weights.asDiagonal() * (acc - tm.bias);
    }
    const VectorXd qdd = H.ldlt().solve(rhs);
    const VectorXd u = arm.MassMatrix(q) * qdd + arm.Bias(q, qd);
    r.worst = std::max(r.worst, (s.torque - u).cwiseAbs().maxCoeff() /
                                    (1.0 + u.cwiseAbs().maxCoeff()));

    // With a force target the returned torque must equal the recursive
    // inverse dynamics at the returned q̈ and λ.
    const osc::OscProblem forced = ArmProblem(arm, q, random3(5.0), 10.0);
    const osc::OscSolution f = osc::OscSolve(arm, q, qd, forced, 0.0);
    if (!f.ok) {
      Fail(r, "case " + std::to_string(trial) + ": " + f.error);
      continue;
    }
    if (f.binding_joints.empty()) {
      const VectorXd id = arm.InverseDynamics(q, qd, f.qdd, f.force);
      r.worst = std::max(r.worst, (f.torque - id).cwiseAbs().maxCoeff() /
                                      (1.0 + id.cwiseAbs().maxCoeff()));
    }
  }
  r.seconds = timer.Seconds();
  if (r.worst > r.tolerance) Fail(r, Fmt("torque mismatch %.3g", r.worst));
  return r;
}

std::vector<SuiteResult> RunAllSuites(const SuiteOptions& opts) {
  return {VerifyLcp(opts), VerifyLinearization(opts), VerifyContactJacobian(opts),
          VerifyProjection(opts), VerifyOsc(opts)};
}

std::string FormatSuite(const SuiteResult& r) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%s %-17s cases=%-4d worst=%.3g tol=%.0e time=%.2fs",
                r.passed ? "PASS" : "FAIL", r.name.c_str(), r.cases, r.worst, r.tolerance,
                r.seconds);
  std::string out = buf;
  if (!r.detail.empty()) out += "  " + r.detail;
  return out;
}

}  // namespace verify
}  // namespace onpalm
