#include "onpalm/scenario/geometry.h"

#include <random>

#include <gtest/gtest.h>

namespace onpalm {
namespace scenario {
namespace {

using Eigen::Quaterniond;
using Eigen::Vector3d;

const TrayParams kTray;

TEST(SignedDistanceTest, BelowBottomFaceCenter) {
  const double hh = 0.5 * kTray.height;
  const SignedDistance sd =
      SignedDistancePointTray(Vector3d(0, 0, -hh - 0.01), Pose{}, kTray, 0.0);
  EXPECT_NEAR(sd.phi, 0.01, 1e-12);
  EXPECT_TRUE(sd.normal.isApprox(Vector3d(0, 0, -1)));
  EXPECT_NEAR(sd.witness.z(), -hh, 1e-12);
}

TEST(SignedDistanceTest, PointOnBottomFace) {
  const SignedDistance sd = SignedDistancePointTray(
      Vector3d(0.1, -0.05, -0.5 * kTray.height), Pose{}, kTray, 0.0);
  EXPECT_NEAR(sd.phi, 0.0, 1e-15);
}

TEST(SignedDistanceTest, LateralBeyondRim) {
  const Vector3d dir = Vector3d(1, 1, 0).normalized();
  const Vector3d p = (kTray.radius + 0.05) * dir + Vector3d(0, 0, -0.5 * kTray.height);
  const SignedDistance sd = SignedDistancePointTray(p, Pose{}, kTray, 0.0);
  EXPECT_NEAR(sd.phi, 0.05, 1e-12);
  EXPECT_TRUE(sd.normal.isApprox(dir, 1e-12));
}

TEST(SignedDistanceTest, RotatedPoseAndSphereRadius) {
  Pose pose;
  pose.rotation = Quaterniond(Eigen::AngleAxisd(0.7, Vector3d(1, 2, 3).normalized()));
  pose.position = Vector3d(0.6, 0.1, 0.5);
  const Vector3d local(0.05, 0.02, -0.5 * kTray.height - 0.03);
  const SignedDistance sd =
      SignedDistancePointTray(pose.rotation * local + pose.position, pose, kTray, 0.01);
  EXPECT_NEAR(sd.phi, 0.02, 1e-12);
  EXPECT_TRUE(sd.normal.isApprox(pose.rotation * Vector3d(0, 0, -1), 1e-12));
}

TEST(SignedDistanceTest, AxisCenterTieBreakUsesMinusZ) {
  const SignedDistance sd = SignedDistancePointTray(Vector3d::Zero(), Pose{}, kTray, 0.0);
  EXPECT_TRUE(sd.normal.isApprox(Vector3d(0, 0, -1)));
  EXPECT_NEAR(sd.phi, -0.5 * kTray.height, 1e-15);
}

TEST(SignedDistanceTest, FaceWinsOnRimEdge) {
  const Vector3d p(kTray.radius, 0, -0.5 * kTray.height);
  const SignedDistance sd = SignedDistancePointTray(p, Pose{}, kTray, 0.0);
  EXPECT_TRUE(sd.normal.isApprox(Vector3d(0, 0, -1)));
}

TEST(SignedDistanceTest, GapIsLipschitzOverWorkspace) {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(-0.35, 0.35);
  double worst = 0.0;
  for (int i = 0; i < 2000; ++i) {
    Pose pose;
    pose.rotation = Quaterniond(Eigen::AngleAxisd(u(rng), Vector3d(u(rng), u(rng), 1).normalized()));
    const Vector3d p(u(rng), u(rng), 0.2 * u(rng));
    const Vector3d dp = 1e-4 * Vector3d(u(rng), u(rng), u(rng));
    const double a = SignedDistancePointTray(p, pose, kTray).phi;
    const double b = SignedDistancePointTray(p + dp, pose, kTray).phi;
    worst = std::max(worst, std::abs(b - a) / dp.norm());
  }
  EXPECT_LE(worst, 2.0);
}

TEST(TraySupportPointTest, HorizontalDirectionHitsSideMidpoint) {
  Pose pose;
  pose.position = Vector3d(0.5, 0.0, 0.4);
  const Vector3d p = TraySupportPoint(Vector3d::UnitY(), pose, kTray);
  EXPECT_TRUE(p.isApprox(Vector3d(0.5, kTray.radius, 0.4)));
}

}  // namespace
}  // namespace scenario
}  // namespace onpalm
