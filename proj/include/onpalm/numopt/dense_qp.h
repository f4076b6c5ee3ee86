#pragma once

#include <vector>

#include <Eigen/Dense>

namespace onpalm {
namespace numopt {

/// Exact solver for small strictly convex QPs
///
///   min ½ xᵀ G x + aᵀ x   s.t.  Ce x = be,  Ci x ≥ bi
///
/// using the Goldfarb–Idnani dual active-set method. G must be positive
/// definite. The method starts from the unconstrained minimizer and adds
/// violated constraints one at a time, which is cheap when the unconstrained
/// point is already close to feasible (the projection use case).
struct DenseQpResult {
  enum class Status { kSolved, kInfeasible, kDegenerate };
  Status status{Status::kInfeasible};
  Eigen::VectorXd x;
  double objective{0.0};
  /// Indices of active inequality rows (equalities are always active).
  std::vector<int> active_inequalities;
};

DenseQpResult SolveDenseStrictlyConvexQp(const Eigen::MatrixXd& G,
                                         const Eigen::VectorXd& a,
                                         const Eigen::MatrixXd& Ce,
                                         const Eigen::VectorXd& be,
                                         const Eigen::MatrixXd& Ci,
                                         const Eigen::VectorXd& bi);

/// Same, with G = diag(g) given as a vector of positive entries.
DenseQpResult SolveDiagonalQp(const Eigen::VectorXd& g, const Eigen::VectorXd& a,
                              const Eigen::MatrixXd& Ce, const Eigen::VectorXd& be,
                              const Eigen::MatrixXd& Ci, const Eigen::VectorXd& bi);

}  // namespace numopt
}  // namespace onpalm
