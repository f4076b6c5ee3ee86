#include "onpalm/verify/verify.h"

#include <gtest/gtest.h>

#include "onpalm/scenario/contacts.h"

namespace onpalm::verify {
namespace {

SuiteOptions Quick() {
  SuiteOptions o;
  o.quick = true;
  return o;
}

TEST(VerifyTest, QuickSuitesPass) {
  for (const SuiteResult& r : RunAllSuites(Quick())) {
    EXPECT_TRUE(r.passed) << FormatSuite(r);
    EXPECT_GT(r.cases, 0);
    EXPECT_LE(r.worst, r.tolerance);
  }
}

TEST(VerifyTest, QuickRunsFewerCases) {
  EXPECT_EQ(VerifyLcp(Quick()).cases, 40);
  EXPECT_EQ(VerifyProjection(Quick()).cases, 20);
}

TEST(VerifyTest, TangentFlipFailsJacobianSuite) {
  scenario::SetTangentFlipForTesting(true);
  const SuiteResult r = VerifyContactJacobian(Quick());
  scenario::SetTangentFlipForTesting(false);
  EXPECT_FALSE(r.passed);
  EXPECT_GT(r.worst, 1e-2);
  EXPECT_TRUE(VerifyContactJacobian(Quick()).passed);
}

TEST(VerifyTest, FormatNamesOutcome) {
  SuiteResult r{"lcp", true, 3, 1e-9, 1e-6, 0.01, ""};
  EXPECT_EQ(FormatSuite(r).rfind("PASS lcp", 0), 0u);
  r.passed = false;
  EXPECT_EQ(FormatSuite(r).rfind("FAIL", 0), 0u);
}

}  // namespace
}  // namespace onpalm::verify
