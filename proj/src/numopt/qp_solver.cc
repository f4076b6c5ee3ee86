#include "onpalm/numopt/qp_solver.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/SparseCholesky>

namespace onpalm {
namespace numopt {

using Eigen::VectorXd;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kInfThreshold = 1e20;

bool IsInf(double v) { return std::abs(v) >= kInfThreshold; }

using Triplets = std::vector<Eigen::Triplet<double>>;

// Stacked constraint rows l ≤ C z ≤ u.
struct StackedConstraints {
  SparseMatrixd C;
  VectorXd l;
  VectorXd u;
};

StackedConstraints Stack(const QuadProgram& prog) {
  const int n = prog.num_vars();
  const int me = prog.num_eq();
  const int mi = prog.num_ineq();
  std::vector<int> bounded;
  for (int j = 0; j < n; ++j) {
    const double lo = prog.lower.size() ? prog.lower(j) : -kInf;
    const double hi = prog.upper.size() ? prog.upper(j) : kInf;
    if (!IsInf(lo) || !IsInf(hi)) bounded.push_back(j);
  }
  const int mb = static_cast<int>(bounded.size());
  const int m = me + mi + mb;
  Triplets trips;
  trips.reserve(prog.eq_matrix.nonZeros() + prog.ineq_matrix.nonZeros() + mb);
  for (int k = 0; k < prog.eq_matrix.outerSize(); ++k) {
    for (SparseMatrixd::InnerIterator it(prog.eq_matrix, k); it; ++it) {
      trips.emplace_back(it.row(), it.col(), it.value());
    }
  }
  for (int k = 0; k < prog.ineq_matrix.outerSize(); ++k) {
    for (SparseMatrixd::InnerIterator it(prog.ineq_matrix, k); it; ++it) {
      trips.emplace_back(me + it.row(), it.col(), it.value());
    }
  }
  StackedConstraints out;
  out.l.resize(m);
  out.u.resize(m);
  if (me) {
    out.l.head(me) = prog.eq_rhs;
    out.u.head(me) = prog.eq_rhs;
  }
  if (mi) {
    out.l.segment(me, mi) = prog.ineq_rhs;
    out.u.segment(me, mi).setConstant(kInf);
  }
  for (int r = 0; r < mb; ++r) {
    const int j = bounded[r];
    trips.emplace_back(me + mi + r, j, 1.0);
    out.l(me + mi + r) = prog.lower.size() ? prog.lower(j) : -kInf;
    out.u(me + mi + r) = prog.upper.size() ? prog.upper(j) : kInf;
  }
  out.C.resize(m, n);
  out.C.setFromTriplets(trips.begin(), trips.end());
  for (int i = 0; i < m; ++i) {
    if (IsInf(out.l(i))) out.l(i) = -kInf;
    if (IsInf(out.u(i))) out.u(i) = kInf;
  }
  return out;
}

SparseMatrixd FullSymmetric(const SparseMatrixd& P) {
  const SparseMatrixd lower = P.triangularView<Eigen::Lower>();
  const SparseMatrixd strict = P.triangularView<Eigen::StrictlyLower>();
  SparseMatrixd full = lower + SparseMatrixd(strict.transpose());
  full.makeCompressed();
  return full;
}

double InfNorm(const VectorXd& v) {
  return v.size() ? v.cwiseAbs().maxCoeff() : 0.0;
}

VectorXd ColumnInfNorms(const SparseMatrixd& M) {
  VectorXd norms = VectorXd::Zero(M.cols());
  for (int k = 0; k < M.outerSize(); ++k) {
    for (SparseMatrixd::InnerIterator it(M, k); it; ++it) {
      norms(it.col()) = std::max(norms(it.col()), std::abs(it.value()));
    }
  }
  return norms;
}

VectorXd RowInfNorms(const SparseMatrixd& M) {
  VectorXd norms = VectorXd::Zero(M.rows());
  for (int k = 0; k < M.outerSize(); ++k) {
    for (SparseMatrixd::InnerIterator it(M, k); it; ++it) {
      norms(it.row()) = std::max(norms(it.row()), std::abs(it.value()));
    }
  }
  return norms;
}

double LimitScaling(double v) {
  if (v < 1e-4) return 1.0;
  if (v > 1e4) return 1e4;
  return v;
}

// Euclidean projection onto [l, u].
VectorXd Clamp(const VectorXd& v, const VectorXd& l, const VectorXd& u) {
  return v.cwiseMax(l).cwiseMin(u);
}

class AdmmWorkspace {
 public:
  AdmmWorkspace(const QuadProgram& prog, const QpSettings& settings)
      : settings_(settings) {
    n_ = prog.num_vars();
    StackedConstraints stacked = Stack(prog);
    m_ = static_cast<int>(stacked.l.size());
    P_ = FullSymmetric(prog.hessian);
    q_ = prog.linear_cost;
    A_ = stacked.C;
    l_ = stacked.l;
    u_ = stacked.u;
    Scale();
    rho_vec_.resize(m_);
    SetRho(settings_.rho);
  }

  QpResult Solve(const QpWarmStart* warm) {
    x_ = VectorXd::Zero(n_);
    y_ = VectorXd::Zero(m_);
    if (warm != nullptr && warm->primal.size() == n_) {
      x_ = warm->primal.cwiseQuotient(D_);
      if (warm->dual.size() == m_) y_ = c_ * warm->dual.cwiseQuotient(E_);
    }
    z_ = Clamp(A_ * x_, l_, u_);
    BuildAndFactorKkt();

    QpResult result;
    result.status = QpStatus::kMaxIterations;
    double best_merit = kInf;
    VectorXd best_x = x_, best_y = y_;
    int last_polish_iteration = -1000;

    VectorXd y_prev = y_;
    for (int iter = 0; iter <= settings_.max_iterations; ++iter) {
      if (iter > 0) {
        y_prev = y_;
        Step();
      }
      const bool check = (iter % settings_.check_interval == 0) ||
                         iter == settings_.max_iterations;
      if (!check) continue;

      Residuals res = ComputeResiduals();
      const double merit = std::max(res.prim, res.dual);
      if (merit < best_merit) {
        best_merit = merit;
        best_x = x_;
        best_y = y_;
      }
      const bool loose = res.prim <= settings_.tol + settings_.admm_rel_tol * res.prim_scale &&
                         res.dual <= settings_.tol + settings_.admm_rel_tol * res.dual_scale;
      const bool tight = res.prim <= settings_.tol && res.dual <= settings_.tol;

      if (settings_.polish && (loose || tight) &&
          (tight || iter - last_polish_iteration >= 50)) {
        last_polish_iteration = iter;
        if (TryPolish(&result)) {
          result.iterations = iter;
          return result;
        }
      }
      if (tight) {
        FillResult(x_, y_, &result);
        result.status = QpStatus::kSolved;
        result.iterations = iter;
        return result;
      }
      if (iter > 0 && PrimalInfeasible(y_ - y_prev)) {
        FillResult(x_, y_, &result);
        result.status = QpStatus::kInfeasible;
        result.iterations = iter;
        return result;
      }
      if (settings_.adaptive_rho && iter > 0 && iter % 25 == 0) {
        AdaptRho(res);
      }
    }
    FillResult(best_x, best_y, &result);
    result.status = QpStatus::kMaxIterations;
    result.iterations = settings_.max_iterations;
    if (settings_.polish) {
      x_ = best_x;
      y_ = best_y;
      z_ = Clamp(A_ * x_ + y_.cwiseQuotient(rho_vec_), l_, u_);
      QpResult polished;
      if (TryPolish(&polished)) {
        polished.iterations = settings_.max_iterations;
        return polished;
      }
    }
    return result;
  }

  void SetOriginal(const QuadProgram* prog) { original_ = prog; }

 private:
  struct Residuals {
    double prim{0}, dual{0}, prim_scale{0}, dual_scale{0};
  };

  void Scale() {
    D_ = VectorXd::Ones(n_);
    E_ = VectorXd::Ones(m_);
    c_ = 1.0;
    for (int it = 0; it < settings_.scaling_iterations; ++it) {
      VectorXd col = ColumnInfNorms(P_).cwiseMax(ColumnInfNorms(A_));
      VectorXd row = RowInfNorms(A_);
      VectorXd dD(n_), dE(m_);
      for (int j = 0; j < n_; ++j) dD(j) = 1.0 / std::sqrt(LimitScaling(col(j)));
      for (int i = 0; i < m_; ++i) dE(i) = 1.0 / std::sqrt(LimitScaling(row(i)));
      P_ = dD.asDiagonal() * P_ * dD.asDiagonal();
      A_ = dE.asDiagonal() * A_ * dD.asDiagonal();
      q_ = q_.cwiseProduct(dD);
      D_ = D_.cwiseProduct(dD);
      E_ = E_.cwiseProduct(dE);
      const VectorXd pcol = ColumnInfNorms(P_);
      const double mean_p = n_ ? pcol.mean() : 0.0;
      const double gamma = 1.0 / LimitScaling(std::max(mean_p, InfNorm(q_)));
      P_ *= gamma;
      q_ *= gamma;
      c_ *= gamma;
    }
    for (int i = 0; i < m_; ++i) {
      if (!std::isinf(l_(i))) l_(i) *= E_(i);
      if (!std::isinf(u_(i))) u_(i) *= E_(i);
    }
    P_.makeCompressed();
    A_.makeCompressed();
    At_ = A_.transpose();
  }

  void SetRho(double rho) {
    rho_ = std::clamp(rho, 1e-6, 1e6);
    for (int i = 0; i < m_; ++i) {
      if (std::isinf(l_(i)) && std::isinf(u_(i))) {
        rho_vec_(i) = 1e-6;
      } else if (l_(i) == u_(i)) {
        rho_vec_(i) = 1e3 * rho_;
      } else {
        rho_vec_(i) = rho_;
      }
    }
  }

  void BuildAndFactorKkt() {
    Triplets trips;
    trips.reserve(P_.nonZeros() + A_.nonZeros() + n_ + m_);
    for (int k = 0; k < P_.outerSize(); ++k) {
      for (SparseMatrixd::InnerIterator it(P_, k); it; ++it) {
        if (it.row() >= it.col()) trips.emplace_back(it.row(), it.col(), it.value());
      }
    }
    for (int j = 0; j < n_; ++j) trips.emplace_back(j, j, settings_.sigma);
    for (int k = 0; k < A_.outerSize(); ++k) {
      for (SparseMatrixd::InnerIterator it(A_, k); it; ++it) {
        trips.emplace_back(n_ + it.row(), it.col(), it.value());
      }
    }
    for (int i = 0; i < m_; ++i) trips.emplace_back(n_ + i, n_ + i, -1.0 / rho_vec_(i));
    SparseMatrixd K(n_ + m_, n_ + m_);
    K.setFromTriplets(trips.begin(), trips.end());
    if (!pattern_analyzed_) {
      ldlt_.analyzePattern(K);
      pattern_analyzed_ = true;
    }
    ldlt_.factorize(K);
    if (ldlt_.info() != Eigen::Success) {
      throw std::runtime_error("QP KKT factorization failed");
    }
  }

  void Step() {
    VectorXd rhs(n_ + m_);
    rhs.head(n_) = settings_.sigma * x_ - q_;
    rhs.tail(m_) = z_ - y_.cwiseQuotient(rho_vec_);
    const VectorXd sol = ldlt_.solve(rhs);
    const VectorXd x_tilde = sol.head(n_);
    const VectorXd z_tilde = z_ + (sol.tail(m_) - y_).cwiseQuotient(rho_vec_);
    const double a = settings_.alpha;
    x_ = a * x_tilde + (1.0 - a) * x_;
    const VectorXd z_relaxed = a * z_tilde + (1.0 - a) * z_;
    const VectorXd z_new = Clamp(z_relaxed + y_.cwiseQuotient(rho_vec_), l_, u_);
    y_ += rho_vec_.cwiseProduct(z_relaxed - z_new);
    z_ = z_new;
  }

  Residuals ComputeResiduals() const {
    Residuals r;
    const VectorXd Ax = A_ * x_;
    const VectorXd Einv = E_.cwiseInverse();
    if (m_) {
      r.prim = InfNorm((Ax - z_).cwiseProduct(Einv));
      r.prim_scale = std::max(InfNorm(Ax.cwiseProduct(Einv)), InfNorm(z_.cwiseProduct(Einv)));
    }
    const VectorXd Px = P_ * x_;
    const VectorXd Aty = At_ * y_;
    const VectorXd Dinv = D_.cwiseInverse();
    r.dual = InfNorm((Px + q_ + Aty).cwiseProduct(Dinv)) / c_;
    r.dual_scale = std::max({InfNorm(Px.cwiseProduct(Dinv)), InfNorm(Aty.cwiseProduct(Dinv)),
                             InfNorm(q_.cwiseProduct(Dinv))}) /
                   c_;
    return r;
  }

  void AdaptRho(const Residuals& res) {
    const double prim_norm = res.prim / std::max(res.prim_scale, 1e-10);
    const double dual_norm = res.dual / std::max(res.dual_scale, 1e-10);
    if (prim_norm <= 0 || dual_norm <= 0) return;
    const double new_rho = std::clamp(rho_ * std::sqrt(prim_norm / dual_norm), 1e-6, 1e6);
    if (new_rho > 5.0 * rho_ || new_rho < 0.2 * rho_) {
      SetRho(new_rho);
      BuildAndFactorKkt();
    }
  }

  bool PrimalInfeasible(const VectorXd& dy) const {
    if (m_ == 0) return false;
    const VectorXd Edy = dy.cwiseProduct(E_);
    const double norm = InfNorm(Edy);
    if (norm < 1e-12) return false;
    const VectorXd dyn = dy / norm;
    const double eps = settings_.infeasibility_tol;
    const VectorXd Atdy = (At_ * dyn).cwiseQuotient(D_);
    if (InfNorm(Atdy) > eps) return false;
    double support = 0.0;
    for (int i = 0; i < m_; ++i) {
      if (dyn(i) > 1e-12) {
        if (std::isinf(u_(i))) return false;
        support += u_(i) * dyn(i);
      } else if (dyn(i) < -1e-12) {
        if (std::isinf(l_(i))) return false;
        support += l_(i) * dyn(i);
      }
    }
    return support < -eps;
  }

  void FillResult(const VectorXd& xs, const VectorXd& ys, QpResult* r) const {
    r->z = xs.cwiseProduct(D_);
    r->dual = ys.cwiseProduct(E_) / c_;
    if (original_ != nullptr) {
      const KktResidual kkt = ComputeKktResidual(*original_, r->z, r->dual);
      r->primal_residual = kkt.primal;
      r->dual_residual = kkt.dual;
    }
  }

  // Reduced KKT solve on the active set guessed from the ADMM iterate.
  bool TryPolish(QpResult* out) {
    std::vector<int> active;
    std::vector<int> side;  // -1 lower, +1 upper, 0 equality
    for (int i = 0; i < m_; ++i) {
      if (l_(i) == u_(i)) {
        active.push_back(i);
        side.push_back(0);
      } else if (!std::isinf(l_(i)) && z_(i) - l_(i) < -y_(i)) {
        active.push_back(i);
        side.push_back(-1);
      } else if (!std::isinf(u_(i)) && u_(i) - z_(i) < y_(i)) {
        active.push_back(i);
        side.push_back(1);
      }
    }
    const int na = static_cast<int>(active.size());
    const double delta = 1e-9;
    Triplets base;
    for (int k = 0; k < P_.outerSize(); ++k) {
      for (SparseMatrixd::InnerIterator it(P_, k); it; ++it) {
        if (it.row() >= it.col()) base.emplace_back(it.row(), it.col(), it.value());
      }
    }
    std::vector<int> row_to_active(m_, -1);
    for (int r = 0; r < na; ++r) row_to_active[active[r]] = r;
    for (int k = 0; k < A_.outerSize(); ++k) {
      for (SparseMatrixd::InnerIterator it(A_, k); it; ++it) {
        const int r = row_to_active[it.row()];
        if (r >= 0) base.emplace_back(n_ + r, it.col(), it.value());
      }
    }
    SparseMatrixd K0(n_ + na, n_ + na);
    K0.setFromTriplets(base.begin(), base.end());
    Triplets reg = base;
    for (int j = 0; j < n_; ++j) reg.emplace_back(j, j, delta);
    for (int r = 0; r < na; ++r) reg.emplace_back(n_ + r, n_ + r, -delta);
    SparseMatrixd Kd(n_ + na, n_ + na);
    Kd.setFromTriplets(reg.begin(), reg.end());

    Eigen::SimplicialLDLT<SparseMatrixd, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt(Kd);
    if (ldlt.info() != Eigen::Success) return false;
    VectorXd rhs(n_ + na);
    rhs.head(n_) = -q_;
    for (int r = 0; r < na; ++r) {
      const int i = active[r];
      rhs(n_ + r) = side[r] > 0 ? u_(i) : l_(i);
    }
    const SparseMatrixd K0full =
        SparseMatrixd(K0.selfadjointView<Eigen::Lower>());
    VectorXd sol = ldlt.solve(rhs);
    for (int k = 0; k < 5; ++k) {
      const VectorXd res = rhs - K0full * sol;
      if (InfNorm(res) < 1e-14 * (1.0 + InfNorm(rhs))) break;
      sol += ldlt.solve(res);
    }
    if (!sol.allFinite()) return false;
    VectorXd xp = sol.head(n_);
    VectorXd yp = VectorXd::Zero(m_);
    for (int r = 0; r < na; ++r) {
      const int i = active[r];
      yp(i) = sol(n_ + r);
      // Multiplier sign must agree with the side of the bound.
      const double sign_tol = 1e-9 * (1.0 + std::abs(yp(i)));
      if (side[r] < 0 && yp(i) > sign_tol) return false;
      if (side[r] > 0 && yp(i) < -sign_tol) return false;
    }
    QpResult candidate;
    FillResult(xp, yp, &candidate);
    if (original_ == nullptr) return false;
    if (candidate.primal_residual > settings_.tol || candidate.dual_residual > settings_.tol) {
      return false;
    }
    candidate.status = QpStatus::kSolved;
    candidate.polished = true;
    *out = candidate;
    return true;
  }

  QpSettings settings_;
  const QuadProgram* original_{nullptr};
  int n_{0}, m_{0};
  SparseMatrixd P_, A_, At_;
  VectorXd q_, l_, u_;
  VectorXd D_, E_;
  double c_{1.0};
  double rho_{0.1};
  VectorXd rho_vec_;
  VectorXd x_, z_, y_;
  Eigen::SimplicialLDLT<SparseMatrixd, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt_;
  bool pattern_analyzed_{false};
};

}  // namespace

std::string_view ToString(QpStatus status) {
  switch (status) {
    case QpStatus::kSolved:
      return "SOLVED";
    case QpStatus::kMaxIterations:
      return "MAX_ITER";
    case QpStatus::kInfeasible:
      return "INFEASIBLE";
  }
  return "UNKNOWN";
}

KktResidual ComputeKktResidual(const QuadProgram& prog, const VectorXd& z,
                               const VectorXd& dual) {
  const StackedConstraints st = Stack(prog);
  KktResidual out;
  const VectorXd Cz = st.C * z;
  for (int i = 0; i < Cz.size(); ++i) {
    double viol = 0.0;
    if (!std::isinf(st.l(i))) viol = std::max(viol, st.l(i) - Cz(i));
    if (!std::isinf(st.u(i))) viol = std::max(viol, Cz(i) - st.u(i));
    out.primal = std::max(out.primal, viol);
  }
  const SparseMatrixd P = FullSymmetric(prog.hessian);
  VectorXd grad = P * z + prog.linear_cost;
  if (dual.size() == Cz.size()) grad += st.C.transpose() * dual;
  out.dual = InfNorm(grad);
  return out;
}

QpResult SolveQp(const QuadProgram& prog, const QpSettings& settings,
                 const QpWarmStart* warm) {
  if (!(settings.tol > 0.0)) throw std::invalid_argument("QP tolerance must be positive");
  const auto issues = Validate(prog);
  if (!issues.empty()) throw std::invalid_argument("invalid QP: " + issues.front());
  AdmmWorkspace ws(prog, settings);
  ws.SetOriginal(&prog);
  return ws.Solve(warm);
}

}  // namespace numopt
}  // namespace onpalm
