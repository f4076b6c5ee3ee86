#include "onpalm/numopt/lcp_solver.h"

#include <random>

#include <gtest/gtest.h>

#include "support/random_problems.h"

namespace onpalm {
namespace numopt {
namespace {

using Eigen::MatrixXd;
using Eigen::Vector3d;
using Eigen::VectorXd;

TEST(LcpSolverTest, PositiveGapGivesZeroForce) {
  const LinCompProblem p{MatrixXd::Constant(1, 1, 1.0), VectorXd::Constant(1, 1.0)};
  for (LcpMethod m : {LcpMethod::kEnumerate, LcpMethod::kIterative}) {
    const LcpResult r = SolveLcp(p, m);
    ASSERT_EQ(r.status, LcpStatus::kSolved);
    EXPECT_EQ(r.lambda(0), 0.0);
    EXPECT_DOUBLE_EQ(r.slack(0), 1.0);
  }
}

// Point-mass block on the ground with one Anitescu contact, pushed along +x.
struct BlockStep {
  LinCompProblem lcp;
  MatrixXd rays;  // 4×3, row i = n + μ·t_i
  Vector3d v_free;
  double mass, dt;

  BlockStep(double push, double mu) : mass(2.0), dt(0.01) {
    const Vector3d n(0, 0, 1);
    const Vector3d tx(1, 0, 0), ty(0, 1, 0);
    rays.resize(4, 3);
    rays.row(0) = (n + mu * tx).transpose();
    rays.row(1) = (n - mu * tx).transpose();
    rays.row(2) = (n + mu * ty).transpose();
    rays.row(3) = (n - mu * ty).transpose();
    v_free = dt * Vector3d(push / mass, 0.0, -9.81);
    lcp.M = dt / mass * rays * rays.transpose();
    lcp.q = rays * v_free;
  }
  Vector3d Impulse(const VectorXd& lambda) const { return rays.transpose() * lambda; }
  Vector3d NextVelocity(const VectorXd& lambda) const {
    return v_free + Impulse(lambda) / mass * dt;
  }
};

TEST(LcpSolverTest, BlockBelowFrictionLimitSticks) {
  const double mu = 0.5;
  const BlockStep s(0.5 * mu * 2.0 * 9.81, mu);
  for (LcpMethod m : {LcpMethod::kEnumerate, LcpMethod::kIterative}) {
    const LcpResult r = SolveLcp(s.lcp, m);
    ASSERT_EQ(r.status, LcpStatus::kSolved);
    const Vector3d v = s.NextVelocity(r.lambda);
    EXPECT_NEAR(v.x(), 0.0, 1e-8);
    EXPECT_NEAR(v.y(), 0.0, 1e-8);
    EXPECT_NEAR(v.z(), 0.0, 1e-8);
  }
}

TEST(LcpSolverTest, BlockAboveFrictionLimitSlides) {
  const double mu = 0.5;
  const BlockStep s(2.0 * mu * 2.0 * 9.81, mu);
  for (LcpMethod m : {LcpMethod::kEnumerate, LcpMethod::kIterative}) {
    const LcpResult r = SolveLcp(s.lcp, m);
    ASSERT_EQ(r.status, LcpStatus::kSolved);
    const Vector3d v = s.NextVelocity(r.lambda);
    EXPECT_GT(v.x(), 1e-4);
    const Vector3d imp = s.Impulse(r.lambda);
    // Friction saturates the cone and opposes the slide.
    EXPECT_LT(imp.x(), 0.0);
    EXPECT_NEAR(-imp.x(), mu * imp.z(), 1e-7);
    EXPECT_NEAR(imp.y(), 0.0, 1e-9);
  }
}

TEST(LcpSolverTest, EnumerateIsBitDeterministic) {
  std::mt19937 rng(1);
  MatrixXd M;
  VectorXd q;
  testing::RandomContactLcp(rng, 8, M, q);
  const LcpResult a = SolveLcp({M, q}, LcpMethod::kEnumerate);
  const LcpResult b = SolveLcp({M, q}, LcpMethod::kEnumerate);
  ASSERT_EQ(a.status, LcpStatus::kSolved);
  for (int i = 0; i < q.size(); ++i) EXPECT_EQ(a.lambda(i), b.lambda(i));
}

TEST(LcpSolverTest, IterativeAgreesWithEnumerationOnContactInstances) {
  std::mt19937 rng(2024);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + trial % 9;
    MatrixXd M;
    VectorXd q;
    testing::RandomContactLcp(rng, n, M, q);
    const LinCompProblem p{M, q};
    const LcpResult e = SolveLcp(p, LcpMethod::kEnumerate);
    const LcpResult it = SolveLcp(p, LcpMethod::kIterative);
    ASSERT_EQ(e.status, LcpStatus::kSolved) << "trial " << trial;
    ASSERT_EQ(it.status, LcpStatus::kSolved) << "trial " << trial << " res " << it.residual;
    EXPECT_LE(e.residual, 1e-8);
    EXPECT_LE(it.residual, 1e-6);
    // For PSD M the slack w = Mλ + q is unique across solutions.
    EXPECT_LT((e.slack - it.slack).cwiseAbs().maxCoeff(), 1e-5) << "trial " << trial;
  }
}

TEST(LcpSolverTest, WarmStartFromSolutionReturnsImmediately) {
  std::mt19937 rng(8);
  MatrixXd M;
  VectorXd q;
  testing::RandomContactLcp(rng, 10, M, q);
  const LcpResult e = SolveLcp({M, q}, LcpMethod::kEnumerate);
  const LcpResult it = SolveLcp({M, q}, LcpMethod::kIterative, {}, &e.lambda);
  EXPECT_EQ(it.iterations, 0);
  EXPECT_LE(it.residual, 1e-8);
}

TEST(LcpSolverTest, ResidualMeasuresOrthogonality) {
  const LinCompProblem p{MatrixXd::Identity(2, 2), (VectorXd(2) << 2.0, -1.0).finished()};
  const VectorXd lam = (VectorXd(2) << 0.1, 1.0).finished();
  EXPECT_NEAR(LcpResidual(p, lam), 0.1 * 2.1, 1e-12);
}

TEST(LcpSolverTest, RejectsBadInput) {
  const LinCompProblem p{MatrixXd::Identity(2, 3), VectorXd::Zero(2)};
  EXPECT_THROW(SolveLcp(p, LcpMethod::kIterative), std::invalid_argument);
  const LinCompProblem big{MatrixXd::Identity(17, 17), VectorXd::Zero(17)};
  EXPECT_THROW(SolveLcp(big, LcpMethod::kEnumerate), std::invalid_argument);
}

}  // namespace
}  // namespace numopt
}  // namespace onpalm
