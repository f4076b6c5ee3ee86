#pragma once

#include <string_view>

#include <Eigen/Dense>

namespace onpalm {
namespace numopt {

/// Find λ with 0 ≤ λ ⊥ Mλ + q ≥ 0.
struct LinCompProblem {
  Eigen::MatrixXd M;
  Eigen::VectorXd q;
};

enum class LcpMethod { kEnumerate, kIterative };
enum class LcpStatus { kSolved, kNoSolution };

std::string_view ToString(LcpStatus status);

struct LcpOptions {
  /// Projected Gauss–Seidel sweep cap and residual target.
  int max_sweeps{500};
  double tol{1e-6};
  /// Accept an enumerated mode when its residual is at most this.
  double enumerate_tol{1e-8};
  /// Active-set refinement rounds after the sweeps.
  int polish_rounds{40};
};

struct LcpResult {
  Eigen::VectorXd lambda;
  Eigen::VectorXd slack;
  LcpStatus status{LcpStatus::kNoSolution};
  double residual{0.0};
  int iterations{0};
};

/// max(|λᵢ wᵢ|, −λᵢ, −wᵢ) over i with w = Mλ + q, floored at 0.
double LcpResidual(const LinCompProblem& p, const Eigen::VectorXd& lambda);

/// kEnumerate tries supports in order of increasing size (lexicographic
/// within a size) and returns the first one that solves; only for n ≤ 16.
/// kIterative runs projected Gauss–Seidel from `warm` (or zero), then
/// refines the active set by direct solves.
LcpResult SolveLcp(const LinCompProblem& p, LcpMethod method, const LcpOptions& opts = {},
                   const Eigen::VectorXd* warm = nullptr);

}  // namespace numopt
}  // namespace onpalm
