#include "onpalm/scenario/contacts.h"

#include <algorithm>
#include <atomic>
#include <cmath>

namespace onpalm {
namespace scenario {

using Eigen::Vector3d;

namespace {

std::atomic<bool> g_flip_tangent{false};

Pose TrayPose(const Eigen::VectorXd& x) {
  Pose p;
  p.rotation = TrayQuaternion(x).normalized();
  p.position = x.segment<3>(kTrayPos);
  return p;
}

void FillTangents(const Pose& tray, Contact& c) {
  Vector3d ref = tray.rotation * Vector3d::UnitX();
  Vector3d t1 = ref - ref.dot(c.normal) * c.normal;
  if (t1.norm() < 0.3) {
    ref = tray.rotation * Vector3d::UnitY();
    t1 = ref - ref.dot(c.normal) * c.normal;
  }
  c.t1 = t1.normalized();
  c.t2 = c.normal.cross(c.t1);
}

// Rail contacts stay this fraction of the radius inside the rim so they
// never sit on the face/side edge, where a tiny sink flips the normal.
constexpr double kRailChordFraction = 0.95;

// Ends of the part of a rail that lies under the tray footprint, as rail
// parameters in [0, 1]. When the rail misses the footprint both ends
// collapse onto the rail point nearest to it.
std::pair<double, double> Chord(const SupportSegment& seg, const Pose& tray, double radius) {
  const Vector3d A = tray.rotation.conjugate() * (seg.start - tray.position);
  const Vector3d B = tray.rotation.conjugate() * (seg.end - tray.position);
  const Eigen::Vector2d a = A.head<2>();
  const Eigen::Vector2d d = (B - A).head<2>();
  const double dd = d.squaredNorm();
  if (dd < 1e-16) return {0.0, 1.0};
  const double b = 2.0 * a.dot(d);
  const double c = a.squaredNorm() - radius * radius;
  const double disc = b * b - 4.0 * dd * c;
  if (disc > 0.0) {
    const double sq = std::sqrt(disc);
    const double lo = std::max(0.0, (-b - sq) / (2.0 * dd));
    const double hi = std::min(1.0, (-b + sq) / (2.0 * dd));
    if (lo <= hi) return {lo, hi};
  }
  const double s = std::clamp(-a.dot(d) / dd, 0.0, 1.0);
  return {s, s};
}

}  // namespace

void SetTangentFlipForTesting(bool enabled) { g_flip_tangent = enabled; }
bool TangentFlipForTesting() { return g_flip_tangent; }

std::vector<Vector3d> EndEffectorContactPoints(const ScenarioConfig& cfg,
                                               const Eigen::VectorXd& x) {
  std::vector<Vector3d> pts;
  const Vector3d ee = x.segment<3>(kEePos);
  const double rho = cfg.ee.contact_circle_fraction * cfg.ee.radius;
  for (int k = 0; k < cfg.ee.num_contacts; ++k) {
    const double th = 2.0 * M_PI * k / cfg.ee.num_contacts;
    pts.push_back(ee + Vector3d(rho * std::cos(th), rho * std::sin(th), 0.5 * cfg.ee.thickness));
  }
  return pts;
}

std::vector<Contact> ComputeContacts(const ScenarioConfig& cfg, const Eigen::VectorXd& x,
                                     FrictionSource friction) {
  const Pose tray = TrayPose(x);
  std::vector<Contact> out;
  out.reserve(cfg.num_contacts());
  auto point_contact = [&](const Vector3d& p, ContactKind kind) {
    const SignedDistance sd = SignedDistancePointTray(p, tray, cfg.tray, cfg.contact_sphere_radius);
    Contact c;
    c.kind = kind;
    c.phi = sd.phi;
    c.witness = sd.witness;
    c.other_point = p;
    c.normal = sd.normal;
    c.mu = cfg.Mu(kind == ContactKind::kEndEffector, friction);
    FillTangents(tray, c);
    out.push_back(c);
  };
  for (const Vector3d& p : EndEffectorContactPoints(cfg, x)) {
    point_contact(p, ContactKind::kEndEffector);
  }
  for (const SupportSegment& seg : cfg.supports) {
    const auto [s0, s1] = Chord(seg, tray, kRailChordFraction * cfg.tray.radius);
    point_contact(seg.start + s0 * (seg.end - seg.start), ContactKind::kSupport);
    point_contact(seg.start + s1 * (seg.end - seg.start), ContactKind::kSupport);
  }
  if (cfg.wall) {
    const WallParams& w = *cfg.wall;
    const Vector3d rel = tray.position - w.center;
    int axis = 0;
    double best = -1.0;
    for (int k = 0; k < 3; ++k) {
      const double v = std::abs(rel(k)) / w.half_extents(k);
      if (v > best) {
        best = v;
        axis = k;
      }
    }
    const double sign = rel(axis) >= 0.0 ? 1.0 : -1.0;
    const Vector3d face_normal = sign * Vector3d::Unit(axis);  // out of the wall
    const Vector3d face_point = w.center + sign * w.half_extents(axis) * Vector3d::Unit(axis);
    Contact c;
    c.kind = ContactKind::kWall;
    c.normal = -face_normal;
    c.witness = TraySupportPoint(c.normal, tray, cfg.tray);
    c.phi = (c.witness - face_point).dot(face_normal) - cfg.contact_sphere_radius;
    c.other_point = c.witness - c.phi * face_normal;
    c.mu = cfg.Mu(false, friction);
    FillTangents(tray, c);
    out.push_back(c);
  }
  return out;
}

ContactRows ContactJacobian(const Eigen::VectorXd& x, const Contact& contact) {
  const Vector3d r = contact.witness - x.segment<3>(kTrayPos);
  ContactRows J = ContactRows::Zero();
  const Vector3d dirs[3] = {contact.normal, contact.t1, contact.t2};
  for (int i = 0; i < 3; ++i) {
    const Vector3d& d = dirs[i];
    if (contact.kind == ContactKind::kEndEffector) J.block<1, 3>(i, kVEe) = d.transpose();
    J.block<1, 3>(i, kVOmega) = -r.cross(d).transpose();
    J.block<1, 3>(i, kVTray) = -d.transpose();
  }
  if (g_flip_tangent) J.row(1) *= -1.0;
  return J;
}

RayRows AnitescuRays(const ContactRows& J, double mu) {
  RayRows R;
  R.row(0) = J.row(0) + mu * J.row(1);
  R.row(1) = J.row(0) - mu * J.row(1);
  R.row(2) = J.row(0) + mu * J.row(2);
  R.row(3) = J.row(0) - mu * J.row(2);
  return R;
}

void StackRays(const Eigen::VectorXd& x, const std::vector<Contact>& contacts,
               Eigen::MatrixXd& rays, Eigen::VectorXd& ray_gap) {
  const int nc = static_cast<int>(contacts.size());
  rays.resize(4 * nc, kNumVelocities);
  ray_gap.resize(4 * nc);
  for (int i = 0; i < nc; ++i) {
    rays.block<4, kNumVelocities>(4 * i, 0) =
        AnitescuRays(ContactJacobian(x, contacts[i]), contacts[i].mu);
    ray_gap.segment<4>(4 * i).setConstant(contacts[i].phi);
  }
}

}  // namespace scenario
}  // namespace onpalm
