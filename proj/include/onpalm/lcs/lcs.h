#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "onpalm/numopt/lcp_solver.h"

namespace onpalm {
namespace lcs {

/// Discrete-time linear complementarity system
///
///   x⁺ = A x + B u + D λ + d
///   0 ≤ λ ⊥ E x + F λ + H u + c ≥ 0
///
/// built once per linearization and immutable afterwards.
struct Lcs {
  Eigen::MatrixXd A, B, D;
  Eigen::VectorXd d;
  Eigen::MatrixXd E, F, H;
  Eigen::VectorXd c;
  double dt{0.0};

  Lcs() = default;
  /// Zero-filled system with the given sizes.
  Lcs(int n_x, int n_u, int n_lambda, double dt);

  int num_states() const { return static_cast<int>(A.rows()); }
  int num_inputs() const { return static_cast<int>(B.cols()); }
  int num_lambdas() const { return static_cast<int>(F.rows()); }

  /// E x + F λ + H u + c.
  Eigen::VectorXd Slack(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                        const Eigen::VectorXd& lambda) const;
  /// A x + B u + D λ + d.
  Eigen::VectorXd Dynamics(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                           const Eigen::VectorXd& lambda) const;
};

/// Every dimension, finiteness and timestep problem; empty when usable.
/// Sizes are taken from A (n_x), B (n_u) and F (n_λ).
std::vector<std::string> Validate(const Lcs& m);

struct StepResult {
  Eigen::VectorXd x_next;
  Eigen::VectorXd lambda;
  numopt::LcpStatus status{numopt::LcpStatus::kNoSolution};
  double lcp_residual{0.0};
};

/// One step: λ from the LCP (F, E x + H u + c), then the affine update.
StepResult Step(const Lcs& m, const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                numopt::LcpMethod method = numopt::LcpMethod::kIterative,
                const Eigen::VectorXd* lambda_warm = nullptr);

/// max(‖x_next − (Ax+Bu+Dλ+d)‖∞, −min λ, −min s, |λᵀ s|), floored at 0,
/// with s the slack at (x, u, λ).
double ComplementarityResidual(const Lcs& m, const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                               const Eigen::VectorXd& lambda, const Eigen::VectorXd& x_next);

/// JSON form: {"n_x", "n_u", "n_lambda", "dt", "A": {"rows", "cols", "data"}, ...}
/// with every matrix stored row-major in "data" and vectors as plain arrays.
/// A state is {"x": [...]}.
std::string ToJson(const Lcs& m);
Lcs LcsFromJson(const std::string& text);
std::string StateToJson(const Eigen::VectorXd& x);
Eigen::VectorXd StateFromJson(const std::string& text);

}  // namespace lcs
}  // namespace onpalm
