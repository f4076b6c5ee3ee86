#include "onpalm/numopt/miqp_projection.h"

#include <chrono>
#include <cmath>
#include <limits>
#include <queue>
#include <stdexcept>

#include "onpalm/numopt/dense_qp.h"
#include "onpalm/numopt/qp_solver.h"

namespace onpalm {
namespace numopt {

using Eigen::MatrixXd;
using Eigen::VectorXd;

std::string_view ToString(ProjectionFlag flag) {
  return flag == ProjectionFlag::kExact ? "EXACT" : "INCUMBENT";
}

std::string_view ToString(ProjectionStatus status) {
  return status == ProjectionStatus::kOk ? "OK" : "INFEASIBLE_KNOT";
}

VectorXd ProjectionSlack(const ComplementarityProjection& prob, const VectorXd& delta) {
  return prob.slack_matrix * delta + prob.slack_offset;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void CheckProjection(const ComplementarityProjection& p) {
  const int n = p.num_vars();
  const int m = p.num_pairs();
  if (p.weights.size() != n || (p.weights.array() <= 0.0).any()) {
    throw std::invalid_argument("projection weights must be positive, one per variable");
  }
  if (!p.target.allFinite()) throw std::invalid_argument("projection target not finite");
  if (p.slack_matrix.rows() != m || (m > 0 && p.slack_matrix.cols() != n) ||
      p.slack_offset.size() != m) {
    throw std::invalid_argument("projection slack data has wrong dimensions");
  }
  std::vector<char> seen(n, 0);
  for (int idx : p.force_index) {
    if (idx < 0 || idx >= n || seen[idx]) {
      throw std::invalid_argument("projection force index invalid or repeated");
    }
    seen[idx] = 1;
  }
  if ((p.lower.size() != 0 && p.lower.size() != n) ||
      (p.upper.size() != 0 && p.upper.size() != n)) {
    throw std::invalid_argument("projection bounds have wrong size");
  }
}

struct RowSet {
  MatrixXd rows;
  VectorXd rhs;
  int count{0};

  explicit RowSet(int cap, int n) : rows(cap, n), rhs(cap) {}
  void Add(const Eigen::Ref<const VectorXd>& a, double b) {
    rows.row(count) = a.transpose();
    rhs(count) = b;
    ++count;
  }
  MatrixXd Rows() const { return rows.topRows(count); }
  VectorXd Rhs() const { return rhs.head(count); }
};

// Keeps a linearly independent subset of the equality rows; the dropped rows
// are returned for a consistency check after the solve.
void FilterDependentRows(const MatrixXd& A, const VectorXd& b, MatrixXd& A_kept,
                         VectorXd& b_kept, MatrixXd& A_dropped, VectorXd& b_dropped) {
  const int m = static_cast<int>(A.rows());
  const int n = static_cast<int>(A.cols());
  MatrixXd basis(m, n);
  int k = 0;
  std::vector<int> kept, dropped;
  for (int i = 0; i < m; ++i) {
    VectorXd r = A.row(i).transpose();
    const double norm0 = r.norm();
    for (int j = 0; j < k; ++j) r -= basis.row(j).dot(r) * basis.row(j).transpose();
    if (r.norm() > 1e-10 * std::max(1.0, norm0)) {
      basis.row(k++) = r.normalized().transpose();
      kept.push_back(i);
    } else {
      dropped.push_back(i);
    }
  }
  A_kept.resize(static_cast<int>(kept.size()), n);
  b_kept.resize(static_cast<int>(kept.size()));
  for (size_t i = 0; i < kept.size(); ++i) {
    A_kept.row(i) = A.row(kept[i]);
    b_kept(i) = b(kept[i]);
  }
  A_dropped.resize(static_cast<int>(dropped.size()), n);
  b_dropped.resize(static_cast<int>(dropped.size()));
  for (size_t i = 0; i < dropped.size(); ++i) {
    A_dropped.row(i) = A.row(dropped[i]);
    b_dropped(i) = b(dropped[i]);
  }
}

bool SolveFallback(const ComplementarityProjection& p, const MatrixXd& Ce,
                   const VectorXd& be, const MatrixXd& Ci, const VectorXd& bi,
                   VectorXd& x) {
  const int n = p.num_vars();
  QuadProgram prog(n);
  prog.SetDenseHessian((2.0 * p.weights).asDiagonal().toDenseMatrix());
  prog.linear_cost = -2.0 * p.weights.cwiseProduct(p.target);
  prog.SetDenseEquality(Ce, be);
  prog.SetDenseInequality(Ci, bi);
  QpSettings s;
  s.tol = 1e-9;
  s.max_iterations = 20000;
  const QpResult r = SolveQp(prog, s);
  if (r.status != QpStatus::kSolved) return false;
  x = r.z;
  return true;
}

}  // namespace

bool SolveModeQp(const ComplementarityProjection& p, const ModeAssignment& modes,
                 VectorXd& delta, double& objective) {
  const int n = p.num_vars();
  const int m = p.num_pairs();
  if (static_cast<int>(modes.size()) != m) {
    throw std::invalid_argument("mode assignment length must equal the pair count");
  }
  RowSet eq(m, n);
  RowSet ineq(2 * m + 2 * n, n);
  for (int i = 0; i < m; ++i) {
    const VectorXd e = VectorXd::Unit(n, p.force_index[i]);
    const VectorXd w = p.slack_matrix.row(i).transpose();
    const double c = p.slack_offset(i);
    switch (modes[i]) {
      case PairMode::kForceZero:
        eq.Add(e, 0.0);
        ineq.Add(w, -c);
        break;
      case PairMode::kSlackZero:
        eq.Add(w, -c);
        ineq.Add(e, 0.0);
        break;
      case PairMode::kFree:
        ineq.Add(e, 0.0);
        ineq.Add(w, -c);
        break;
    }
  }
  for (int j = 0; j < n; ++j) {
    if (p.lower.size() == n && std::isfinite(p.lower(j))) {
      ineq.Add(VectorXd::Unit(n, j), p.lower(j));
    }
    if (p.upper.size() == n && std::isfinite(p.upper(j))) {
      ineq.Add(-VectorXd::Unit(n, j), -p.upper(j));
    }
  }
  MatrixXd Ce, Cd;
  VectorXd be, bd;
  FilterDependentRows(eq.Rows(), eq.Rhs(), Ce, be, Cd, bd);
  const MatrixXd Ci = ineq.Rows();
  const VectorXd bi = ineq.Rhs();
  const VectorXd g = 2.0 * p.weights;
  const VectorXd a = -2.0 * p.weights.cwiseProduct(p.target);
  const DenseQpResult r = SolveDiagonalQp(g, a, Ce, be, Ci, bi);
  auto feasible = [&](const VectorXd& x) {
    const double tol = 1e-8 * (1.0 + x.cwiseAbs().maxCoeff());
    if (Cd.rows() > 0 && (Cd * x - bd).cwiseAbs().maxCoeff() > tol) return false;
    if (Ce.rows() > 0 && (Ce * x - be).cwiseAbs().maxCoeff() > tol) return false;
    if (Ci.rows() > 0 && (Ci * x - bi).minCoeff() < -tol) return false;
    return true;
  };
  VectorXd x;
  if (r.status == DenseQpResult::Status::kInfeasible) return false;
  if (r.status == DenseQpResult::Status::kSolved && feasible(r.x)) {
    x = r.x;
  } else if (!SolveFallback(p, Ce, be, Ci, bi, x) || !feasible(x)) {
    return false;
  }
  delta = x;
  objective = (x - p.target).cwiseAbs2().dot(p.weights);
  return true;
}

ProjectionResult ProjectComplementarity(const ComplementarityProjection& prob,
                                        const ProjectionBudget& budget,
                                        const ModeAssignment* hint) {
  CheckProjection(prob);
  const int m = prob.num_pairs();
  const auto start = std::chrono::steady_clock::now();
  auto out_of_time = [&]() {
    if (budget.time_limit <= 0.0) return false;
    const std::chrono::duration<double> el = std::chrono::steady_clock::now() - start;
    return el.count() > budget.time_limit;
  };

  ProjectionResult out;
  double incumbent = kInf;
  VectorXd best;
  ModeAssignment best_modes;

  // Pair to branch on, or -1 when every free pair is complementary.
  auto select_pair = [&](const ModeAssignment& modes, const VectorXd& x) {
    const VectorXd s = ProjectionSlack(prob, x);
    int pick = -1;
    double worst = budget.complementarity_tol;
    for (int i = 0; i < m; ++i) {
      if (modes[i] != PairMode::kFree) continue;
      const double v = std::min(x(prob.force_index[i]), s(i));
      if (v > worst) {
        worst = v;
        pick = i;
      }
    }
    return pick;
  };
  auto resolve = [&](const ModeAssignment& modes, const VectorXd& x) {
    const VectorXd s = ProjectionSlack(prob, x);
    ModeAssignment full = modes;
    for (int i = 0; i < m; ++i) {
      if (full[i] == PairMode::kFree) {
        full[i] = x(prob.force_index[i]) <= s(i) ? PairMode::kForceZero : PairMode::kSlackZero;
      }
    }
    return full;
  };
  auto offer = [&](const ModeAssignment& modes) {
    VectorXd x;
    double obj;
    ++out.nodes;
    if (SolveModeQp(prob, modes, x, obj) && obj < incumbent) {
      incumbent = obj;
      best = x;
      best_modes = modes;
    }
  };

  struct Node {
    double bound;
    long seq;
    ModeAssignment modes;
    VectorXd x;
  };
  struct Worse {
    bool operator()(const Node& a, const Node& b) const {
      if (a.bound != b.bound) return a.bound > b.bound;
      return a.seq > b.seq;
    }
  };
  std::priority_queue<Node, std::vector<Node>, Worse> open;
  long seq = 0;

  {
    ModeAssignment root_modes(m, PairMode::kFree);
    VectorXd x;
    double obj;
    ++out.nodes;
    if (!SolveModeQp(prob, root_modes, x, obj)) {
      out.status = ProjectionStatus::kInfeasibleKnot;
      out.delta = prob.target;
      out.incumbent_history.push_back(incumbent);
      return out;
    }
    if (hint != nullptr && static_cast<int>(hint->size()) == m) {
      bool full = true;
      for (PairMode md : *hint) full = full && md != PairMode::kFree;
      if (full) offer(*hint);
    }
    if (select_pair(root_modes, x) < 0) {
      if (obj < incumbent) {
        incumbent = obj;
        best = x;
        best_modes = resolve(root_modes, x);
      }
    } else {
      offer(resolve(root_modes, x));
      open.push({obj, seq++, root_modes, x});
    }
    out.incumbent_history.push_back(incumbent);
  }

  const double gap = 1e-12;
  bool exhausted = false;
  while (!open.empty()) {
    if (out.nodes >= budget.max_nodes || out_of_time()) {
      exhausted = true;
      break;
    }
    Node node = open.top();
    open.pop();
    if (node.bound >= incumbent - gap * (1.0 + std::abs(incumbent))) continue;
    const int pair = select_pair(node.modes, node.x);
    if (pair < 0) {
      if (node.bound < incumbent) {
        incumbent = node.bound;
        best = node.x;
        best_modes = resolve(node.modes, node.x);
      }
      out.incumbent_history.push_back(incumbent);
      continue;
    }
    for (PairMode branch : {PairMode::kForceZero, PairMode::kSlackZero}) {
      ModeAssignment child = node.modes;
      child[pair] = branch;
      VectorXd x;
      double obj;
      ++out.nodes;
      if (!SolveModeQp(prob, child, x, obj)) {
        out.incumbent_history.push_back(incumbent);
        continue;
      }
      if (obj >= incumbent - gap * (1.0 + std::abs(incumbent))) {
        out.incumbent_history.push_back(incumbent);
        continue;
      }
      if (select_pair(child, x) < 0) {
        incumbent = obj;
        best = x;
        best_modes = resolve(child, x);
      } else {
        open.push({obj, seq++, std::move(child), std::move(x)});
      }
      out.incumbent_history.push_back(incumbent);
    }
  }

  out.lower_bound = open.empty() ? incumbent : std::min(incumbent, open.top().bound);
  if (!std::isfinite(incumbent)) {
    // Out of budget before any feasible mode; try rounding the best open node.
    if (!open.empty()) {
      const Node& top = open.top();
      offer(resolve(top.modes, top.x));
      out.incumbent_history.push_back(incumbent);
    }
    if (!std::isfinite(incumbent)) {
      out.status = ProjectionStatus::kInfeasibleKnot;
      out.delta = prob.target;
      return out;
    }
  }
  out.status = ProjectionStatus::kOk;
  out.flag = exhausted ? ProjectionFlag::kIncumbent : ProjectionFlag::kExact;
  out.delta = best;
  out.objective = incumbent;
  out.modes = best_modes;
  return out;
}

}  // namespace numopt
}  // namespace onpalm
