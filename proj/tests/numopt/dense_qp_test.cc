#include "onpalm/numopt/dense_qp.h"

#include <random>

#include <gtest/gtest.h>

#include "support/qp_oracle.h"
#include "support/random_problems.h"

namespace onpalm {
namespace numopt {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

TEST(DenseQpTest, UnconstrainedMinimizer) {
  const MatrixXd G = 2.0 * MatrixXd::Identity(2, 2);
  const VectorXd a = (VectorXd(2) << -2.0, 4.0).finished();
  const DenseQpResult r =
      SolveDenseStrictlyConvexQp(G, a, MatrixXd(0, 2), VectorXd(0), MatrixXd(0, 2), VectorXd(0));
  ASSERT_EQ(r.status, DenseQpResult::Status::kSolved);
  EXPECT_NEAR(r.x(0), 1.0, 1e-12);
  EXPECT_NEAR(r.x(1), -2.0, 1e-12);
}

TEST(DenseQpTest, MatchesBruteForceOnRandomInstances) {
  std::mt19937 rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 4 + trial % 3;
    const int me = trial % 2;
    const int mi = 6;
    const MatrixXd G = testing::RandomPsd(rng, n, n) + 0.2 * MatrixXd::Identity(n, n);
    const VectorXd a = testing::RandomVector(rng, n, 3.0);
    MatrixXd Ce(me, n), Ci(mi, n);
    for (int i = 0; i < me; ++i) Ce.row(i) = testing::RandomVector(rng, n).transpose();
    for (int i = 0; i < mi; ++i) Ci.row(i) = testing::RandomVector(rng, n).transpose();
    const VectorXd be = testing::RandomVector(rng, me);
    const VectorXd x0 = me > 0 ? VectorXd(Ce.completeOrthogonalDecomposition().solve(be))
                               : VectorXd(VectorXd::Zero(n));
    const VectorXd bi = Ci * x0 - VectorXd::Constant(mi, 0.3);
    VectorXd x_ref;
    double f_ref;
    ASSERT_TRUE(testing::BruteForceQp(G, a, Ce, be, Ci, bi, x_ref, f_ref));
    const DenseQpResult r = SolveDenseStrictlyConvexQp(G, a, Ce, be, Ci, bi);
    ASSERT_EQ(r.status, DenseQpResult::Status::kSolved) << "trial " << trial;
    EXPECT_LT((r.x - x_ref).cwiseAbs().maxCoeff(), 1e-8) << "trial " << trial;
    EXPECT_NEAR(r.objective, f_ref, 1e-8 * (1.0 + std::abs(f_ref)));
  }
}

TEST(DenseQpTest, DiagonalVariantAgreesWithGeneral) {
  std::mt19937 rng(4);
  const int n = 6, mi = 8;
  VectorXd g(n);
  for (int i = 0; i < n; ++i) g(i) = 0.5 + i;
  const VectorXd a = testing::RandomVector(rng, n, 2.0);
  MatrixXd Ci(mi, n);
  for (int i = 0; i < mi; ++i) Ci.row(i) = testing::RandomVector(rng, n).transpose();
  const VectorXd bi = -VectorXd::Constant(mi, 0.2);
  const MatrixXd Ce = MatrixXd::Ones(1, n);
  const VectorXd be = VectorXd::Constant(1, 0.1);
  const DenseQpResult r1 = SolveDiagonalQp(g, a, Ce, be, Ci, bi);
  const DenseQpResult r2 =
      SolveDenseStrictlyConvexQp(g.asDiagonal().toDenseMatrix(), a, Ce, be, Ci, bi);
  ASSERT_EQ(r1.status, DenseQpResult::Status::kSolved);
  ASSERT_EQ(r2.status, DenseQpResult::Status::kSolved);
  EXPECT_LT((r1.x - r2.x).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(DenseQpTest, ReportsInfeasible) {
  const MatrixXd G = MatrixXd::Identity(1, 1);
  MatrixXd Ci(2, 1);
  Ci << 1.0, -1.0;
  const DenseQpResult r = SolveDenseStrictlyConvexQp(G, VectorXd::Zero(1), MatrixXd(0, 1),
                                                     VectorXd(0), Ci, VectorXd::Constant(2, 1.0));
  EXPECT_EQ(r.status, DenseQpResult::Status::kInfeasible);
}

TEST(DenseQpTest, RejectsIndefiniteHessian) {
  MatrixXd G(2, 2);
  G << 1.0, 0.0, 0.0, -1.0;
  EXPECT_THROW(SolveDenseStrictlyConvexQp(G, VectorXd::Zero(2), MatrixXd(0, 2), VectorXd(0),
                                          MatrixXd(0, 2), VectorXd(0)),
               std::invalid_argument);
}

}  // namespace
}  // namespace numopt
}  // namespace onpalm
