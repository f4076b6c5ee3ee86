#pragma once

#include <optional>
#include <string_view>

#include <Eigen/Dense>

#include "onpalm/numopt/quad_program.h"

namespace onpalm {
namespace numopt {

enum class QpStatus { kSolved, kMaxIterations, kInfeasible };

std::string_view ToString(QpStatus status);

struct QpSettings {
  /// Absolute tolerance on primal feasibility and stationarity of the
  /// returned point.
  double tol{1e-6};
  /// Relative tolerance used to stop the ADMM phase before polishing.
  double admm_rel_tol{1e-4};
  int max_iterations{4000};
  double rho{0.1};
  double sigma{1e-6};
  double alpha{1.6};
  int scaling_iterations{10};
  bool adaptive_rho{true};
  int check_interval{5};
  bool polish{true};
  double infeasibility_tol{1e-7};
};

/// Primal and dual iterates. The dual is ordered as the stacked constraint
/// rows [equality; inequality; finite bounds] and follows the convention
/// P z + q + Cᵀ y = 0 for the stacked rows l ≤ C z ≤ u, so y < 0 marks an
/// active lower side and y > 0 an active upper side.
struct QpWarmStart {
  Eigen::VectorXd primal;
  Eigen::VectorXd dual;
};

struct QpResult {
  Eigen::VectorXd z;
  Eigen::VectorXd dual;
  QpStatus status{QpStatus::kMaxIterations};
  int iterations{0};
  double primal_residual{0.0};
  double dual_residual{0.0};
  bool polished{false};

  QpWarmStart AsWarmStart() const { return {z, dual}; }
};

/// Solves a convex QP with an operator-splitting (ADMM) iteration on the
/// Ruiz-equilibrated problem, followed by an active-set polish step that
/// solves the reduced KKT system. Deterministic for identical inputs.
///
/// On kMaxIterations the best iterate found is returned. The warm start is
/// ignored when its dimensions do not match `prog`.
QpResult SolveQp(const QuadProgram& prog, const QpSettings& settings = {},
                 const QpWarmStart* warm = nullptr);

/// Unscaled KKT residuals of (z, y) against `prog`: the largest bound or
/// constraint violation and the stationarity ∞-norm.
struct KktResidual {
  double primal{0.0};
  double dual{0.0};
};
KktResidual ComputeKktResidual(const QuadProgram& prog, const Eigen::VectorXd& z,
                               const Eigen::VectorXd& dual);

}  // namespace numopt
}  // namespace onpalm
