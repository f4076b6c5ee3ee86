#include "onpalm/numopt/quad_program.h"

#include <cmath>
#include <sstream>

namespace onpalm {
namespace numopt {

using Eigen::MatrixXd;
using Eigen::VectorXd;

QuadProgram::QuadProgram(int n)
    : hessian(n, n),
      linear_cost(VectorXd::Zero(n)),
      eq_matrix(0, n),
      eq_rhs(0),
      ineq_matrix(0, n),
      ineq_rhs(0) {}

void QuadProgram::SetDenseHessian(const MatrixXd& P) {
  hessian = P.sparseView(0.0, 0.0);
}

void QuadProgram::SetDenseEquality(const MatrixXd& A, const VectorXd& b) {
  eq_matrix = A.sparseView(0.0, 0.0);
  eq_rhs = b;
}

void QuadProgram::SetDenseInequality(const MatrixXd& A, const VectorXd& b) {
  ineq_matrix = A.sparseView(0.0, 0.0);
  ineq_rhs = b;
}

double QuadProgram::Objective(const VectorXd& z) const {
  const SparseMatrixd lower_part = hessian.triangularView<Eigen::Lower>();
  const SparseMatrixd strict = hessian.triangularView<Eigen::StrictlyLower>();
  const VectorXd Pz = lower_part * z + strict.transpose() * z;
  return 0.5 * z.dot(Pz) + linear_cost.dot(z);
}

std::vector<std::string> Validate(const QuadProgram& prog) {
  std::vector<std::string> issues;
  const int n = prog.num_vars();
  auto report = [&issues](const std::string& msg) { issues.push_back(msg); };
  if (prog.hessian.rows() != n || prog.hessian.cols() != n) {
    std::ostringstream os;
    os << "hessian is " << prog.hessian.rows() << "x" << prog.hessian.cols()
       << ", expected " << n << "x" << n;
    report(os.str());
  } else {
    const MatrixXd P(prog.hessian);
    // Callers may pass only the lower triangle; check symmetry only when
    // the upper triangle is populated.
    const MatrixXd upper = P.triangularView<Eigen::StrictlyUpper>();
    if (upper.norm() > 0.0) {
      const double asym = (P - P.transpose()).cwiseAbs().maxCoeff();
      if (asym > 1e-10) report("hessian is not symmetric");
    }
    if (!P.allFinite()) report("hessian has non-finite entries");
  }
  if (!prog.linear_cost.allFinite()) report("linear_cost has non-finite entries");
  if (prog.eq_matrix.rows() != prog.eq_rhs.size() ||
      (prog.eq_matrix.rows() > 0 && prog.eq_matrix.cols() != n)) {
    report("equality matrix dimensions do not match");
  }
  if (prog.ineq_matrix.rows() != prog.ineq_rhs.size() ||
      (prog.ineq_matrix.rows() > 0 && prog.ineq_matrix.cols() != n)) {
    report("inequality matrix dimensions do not match");
  }
  if (prog.lower.size() != 0 && prog.lower.size() != n) {
    report("lower bound has wrong size");
  }
  if (prog.upper.size() != 0 && prog.upper.size() != n) {
    report("upper bound has wrong size");
  }
  if (prog.lower.size() == n && prog.upper.size() == n) {
    for (int i = 0; i < n; ++i) {
      if (prog.lower(i) > prog.upper(i)) {
        std::ostringstream os;
        os << "bound " << i << " has lo > hi";
        report(os.str());
      }
    }
  }
  return issues;
}

}  // namespace numopt
}  // namespace onpalm
