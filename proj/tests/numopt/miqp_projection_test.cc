#include "onpalm/numopt/miqp_projection.h"

#include <random>

#include <gtest/gtest.h>

#include "support/qp_oracle.h"
#include "support/random_problems.h"

namespace onpalm {
namespace numopt {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Knot layout [x (nx), λ (m), u (nu)] with slack = E x + F λ + H u + c.
ComplementarityProjection RandomKnot(std::mt19937& rng, int nx, int m, int nu) {
  const int n = nx + m + nu;
  ComplementarityProjection p;
  p.weights.resize(n);
  p.weights << VectorXd::Constant(nx, 0.1), VectorXd::Constant(m, 10.0),
      VectorXd::Constant(nu, 3.0);
  p.target = testing::RandomVector(rng, n);
  p.slack_matrix.resize(m, n);
  for (int i = 0; i < m; ++i) {
    p.slack_matrix.row(i).head(nx) = testing::RandomVector(rng, nx).transpose();
    p.slack_matrix.row(i).tail(nu) = testing::RandomVector(rng, nu).transpose();
  }
  p.slack_matrix.block(0, nx, m, m) = testing::RandomPsd(rng, m, m) * 0.5;
  p.slack_offset = testing::RandomVector(rng, m);
  for (int i = 0; i < m; ++i) p.force_index.push_back(nx + i);
  return p;
}

// Exhaustive oracle: every fully fixed mode, each solved by brute-force
// active-set enumeration.
double Exhaustive(const ComplementarityProjection& p, VectorXd& best) {
  const int n = p.num_vars();
  const int m = p.num_pairs();
  const MatrixXd G = (2.0 * p.weights).asDiagonal();
  const VectorXd a = -2.0 * p.weights.cwiseProduct(p.target);
  double f_best = std::numeric_limits<double>::infinity();
  for (int mask = 0; mask < (1 << m); ++mask) {
    MatrixXd Ce(m, n), Ci(m, n);
    VectorXd be(m), bi(m);
    for (int i = 0; i < m; ++i) {
      const VectorXd e = VectorXd::Unit(n, p.force_index[i]);
      const VectorXd w = p.slack_matrix.row(i).transpose();
      if ((mask >> i) & 1) {  // slack zero
        Ce.row(i) = w.transpose();
        be(i) = -p.slack_offset(i);
        Ci.row(i) = e.transpose();
        bi(i) = 0.0;
      } else {
        Ce.row(i) = e.transpose();
        be(i) = 0.0;
        Ci.row(i) = w.transpose();
        bi(i) = -p.slack_offset(i);
      }
    }
    VectorXd x;
    double f;
    if (!testing::BruteForceQp(G, a, Ce, be, Ci, bi, x, f)) continue;
    const double obj = (x - p.target).cwiseAbs2().dot(p.weights);
    if (obj < f_best) {
      f_best = obj;
      best = x;
    }
  }
  return f_best;
}

double MaxComplementarityViolation(const ComplementarityProjection& p, const VectorXd& d) {
  const VectorXd s = ProjectionSlack(p, d);
  double v = 0.0;
  for (int i = 0; i < p.num_pairs(); ++i) {
    const double lam = d(p.force_index[i]);
    v = std::max({v, std::abs(lam * s(i)), -lam, -s(i)});
  }
  return v;
}

TEST(MiqpProjectionTest, FeasiblePointProjectsToItself) {
  std::mt19937 rng(1);
  ComplementarityProjection p = RandomKnot(rng, 3, 2, 1);
  // Zero force on pair 0; solve for the target so that pair 1 sits on
  // slack = 0 with positive force.
  VectorXd w = VectorXd::Zero(6);
  w(4) = 0.7;
  p.slack_offset = -p.slack_matrix * w;
  p.slack_offset(0) += 0.5;
  p.target = w;
  const ProjectionResult r = ProjectComplementarity(p);
  ASSERT_EQ(r.status, ProjectionStatus::kOk);
  EXPECT_EQ(r.flag, ProjectionFlag::kExact);
  EXPECT_LT((r.delta - w).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_NEAR(r.objective, 0.0, 1e-12);
}

TEST(MiqpProjectionTest, TwoPairsMatchFourModeEnumeration) {
  std::mt19937 rng(2);
  const ComplementarityProjection p = RandomKnot(rng, 3, 2, 1);
  VectorXd ref;
  const double f_ref = Exhaustive(p, ref);
  const ProjectionResult r = ProjectComplementarity(p);
  ASSERT_EQ(r.status, ProjectionStatus::kOk);
  EXPECT_EQ(r.flag, ProjectionFlag::kExact);
  EXPECT_NEAR(r.objective, f_ref, 1e-6);
  EXPECT_LE(MaxComplementarityViolation(p, r.delta), 1e-8);
}

TEST(MiqpProjectionTest, MatchesExhaustiveEnumerationOnRandomKnots) {
  std::mt19937 rng(77);
  ProjectionBudget unlimited;
  unlimited.max_nodes = 1 << 20;
  unlimited.time_limit = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int m = 1 + trial % 4;
    const ComplementarityProjection p = RandomKnot(rng, 4, m, 2);
    VectorXd ref;
    const double f_ref = Exhaustive(p, ref);
    ASSERT_TRUE(std::isfinite(f_ref));
    const ProjectionResult r = ProjectComplementarity(p, unlimited);
    ASSERT_EQ(r.status, ProjectionStatus::kOk) << "trial " << trial;
    EXPECT_EQ(r.flag, ProjectionFlag::kExact);
    EXPECT_NEAR(r.objective, f_ref, 1e-6 * (1.0 + f_ref)) << "trial " << trial;
    EXPECT_LE(MaxComplementarityViolation(p, r.delta), 1e-8) << "trial " << trial;
  }
}

TEST(MiqpProjectionTest, IncumbentIsMonotoneOverNodes) {
  std::mt19937 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const ComplementarityProjection p = RandomKnot(rng, 6, 8, 2);
    ProjectionBudget b;
    b.time_limit = 0.0;
    const ProjectionResult r = ProjectComplementarity(p, b);
    ASSERT_FALSE(r.incumbent_history.empty());
    for (size_t i = 1; i < r.incumbent_history.size(); ++i) {
      EXPECT_LE(r.incumbent_history[i], r.incumbent_history[i - 1]);
    }
    EXPECT_LE(r.lower_bound, r.objective + 1e-12);
  }
}

TEST(MiqpProjectionTest, NodeBudgetYieldsIncumbent) {
  std::mt19937 rng(6);
  ProjectionBudget tight;
  tight.max_nodes = 2;
  tight.time_limit = 0.0;
  int incumbents = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const ComplementarityProjection p = RandomKnot(rng, 6, 10, 2);
    const ProjectionResult r = ProjectComplementarity(p, tight);
    if (r.status != ProjectionStatus::kOk) continue;
    if (r.flag == ProjectionFlag::kIncumbent) ++incumbents;
    EXPECT_LE(MaxComplementarityViolation(p, r.delta), 1e-8);
  }
  EXPECT_GT(incumbents, 0);
}

TEST(MiqpProjectionTest, HintSeedsIncumbent) {
  std::mt19937 rng(9);
  const ComplementarityProjection p = RandomKnot(rng, 4, 4, 2);
  ProjectionBudget b;
  b.time_limit = 0.0;
  const ProjectionResult first = ProjectComplementarity(p, b);
  const ProjectionResult second = ProjectComplementarity(p, b, &first.modes);
  EXPECT_NEAR(second.objective, first.objective, 1e-9);
  EXPECT_LE(second.nodes, first.nodes + 1);
}

TEST(MiqpProjectionTest, InfeasibleBoundsReported) {
  std::mt19937 rng(3);
  ComplementarityProjection p = RandomKnot(rng, 2, 1, 1);
  const int n = p.num_vars();
  p.lower = VectorXd::Constant(n, -std::numeric_limits<double>::infinity());
  p.upper = VectorXd::Constant(n, std::numeric_limits<double>::infinity());
  p.upper(p.force_index[0]) = -1.0;
  const ProjectionResult r = ProjectComplementarity(p);
  EXPECT_EQ(r.status, ProjectionStatus::kInfeasibleKnot);
}

TEST(MiqpProjectionTest, RejectsNonPositiveWeights) {
  std::mt19937 rng(3);
  ComplementarityProjection p = RandomKnot(rng, 2, 1, 1);
  p.weights(0) = 0.0;
  EXPECT_THROW(ProjectComplementarity(p), std::invalid_argument);
}

}  // namespace
}  // namespace numopt
}  // namespace onpalm
