#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace onpalm {
namespace numopt {

using SparseMatrixd = Eigen::SparseMatrix<double>;

/// A convex quadratic program
///
///   min  ½ zᵀ P z + qᵀ z
///   s.t. Aeq z  = beq
///        Ain z ≥ bin
///        lo ≤ z ≤ hi
///
/// Bounds may be left empty (unbounded) or contain ±infinity entries. Only
/// the lower triangle of P is read; P must be symmetric PSD.
struct QuadProgram {
  SparseMatrixd hessian;
  Eigen::VectorXd linear_cost;
  SparseMatrixd eq_matrix;
  Eigen::VectorXd eq_rhs;
  SparseMatrixd ineq_matrix;
  Eigen::VectorXd ineq_rhs;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  QuadProgram() = default;
  /// Unconstrained program of dimension n with zero cost.
  explicit QuadProgram(int n);

  int num_vars() const { return static_cast<int>(linear_cost.size()); }
  int num_eq() const { return static_cast<int>(eq_rhs.size()); }
  int num_ineq() const { return static_cast<int>(ineq_rhs.size()); }

  void SetDenseHessian(const Eigen::MatrixXd& P);
  void SetDenseEquality(const Eigen::MatrixXd& A, const Eigen::VectorXd& b);
  void SetDenseInequality(const Eigen::MatrixXd& A, const Eigen::VectorXd& b);

  double Objective(const Eigen::VectorXd& z) const;
};

/// Returns every structural problem with `prog`; empty means solvable input.
std::vector<std::string> Validate(const QuadProgram& prog);

}  // namespace numopt
}  // namespace onpalm
