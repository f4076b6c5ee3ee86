#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace onpalm {
namespace verify {

struct SuiteOptions {
  /// Roughly a fifth of the cases.
  bool quick{false};
  uint64_t seed{20240601};
};

struct SuiteResult {
  std::string name;
  bool passed{false};
  int cases{0};
  /// Worst error measure over the cases, compared against `tolerance`.
  double worst{0.0};
  double tolerance{0.0};
  double seconds{0.0};
  /// Extra measurements or the first failing case.
  std::string detail;
};

/// ITERATIVE against ENUMERATE on random contact LCPs with up to 10 rays.
SuiteResult VerifyLcp(const SuiteOptions& opts = {});
/// A, B of the linearization against central differences of the ground
/// truth at contact-free states, plus the one-step error ratio when dt halves.
SuiteResult VerifyLinearization(const SuiteOptions& opts = {});
/// Contact Jacobian rows against differenced contact-point motion.
SuiteResult VerifyContactJacobian(const SuiteOptions& opts = {});
/// Branch and bound against exhaustive mode enumeration, up to 4 pairs.
SuiteResult VerifyProjection(const SuiteOptions& opts = {});
/// OSC torques against weighted least squares plus rigid-body inverse
/// dynamics, and the force-target case against M q̈ + C + Jᵀλ.
SuiteResult VerifyOsc(const SuiteOptions& opts = {});

std::vector<SuiteResult> RunAllSuites(const SuiteOptions& opts = {});

/// One line per suite: "PASS lcp  cases=200 worst=3.1e-09 tol=1e-06 ...".
std::string FormatSuite(const SuiteResult& r);

}  // namespace verify
}  // namespace onpalm
