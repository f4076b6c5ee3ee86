#include "onpalm/numopt/dense_qp.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace onpalm {
namespace numopt {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr double kInf = std::numeric_limits<double>::infinity();

// Working matrices of the dual method: J = L⁻ᵀ Q (Q orthogonal) and the
// upper-triangular R with N = Q R for the active normals N.
struct ActiveSetFactor {
  MatrixXd J;
  MatrixXd R;
  double r_norm{1.0};
  int n{0};

  // Appends the constraint whose transformed normal is d = Jᵀ np.
  bool Add(VectorXd& d, int& iq) {
    for (int j = n - 1; j >= iq + 1; --j) {
      double cc = d(j - 1);
      double ss = d(j);
      const double h = std::hypot(cc, ss);
      if (std::abs(h) < kEps) continue;
      d(j) = 0.0;
      ss /= h;
      cc /= h;
      if (cc < 0.0) {
        cc = -cc;
        ss = -ss;
        d(j - 1) = -h;
      } else {
        d(j - 1) = h;
      }
      Rotate(j - 1, j, cc, ss);
    }
    ++iq;
    for (int i = 0; i < iq; ++i) R(i, iq - 1) = d(i);
    if (std::abs(d(iq - 1)) <= kEps * r_norm) return false;
    r_norm = std::max(r_norm, std::abs(d(iq - 1)));
    return true;
  }

  // Removes active constraint `l`; slot iq holds the pending constraint.
  void Delete(std::vector<int>& A, VectorXd& u, int me, int& iq, int l) {
    int qq = -1;
    for (int i = me; i < iq; ++i) {
      if (A[i] == l) {
        qq = i;
        break;
      }
    }
    if (qq < 0) return;
    for (int i = qq; i < iq - 1; ++i) {
      A[i] = A[i + 1];
      u(i) = u(i + 1);
      R.col(i) = R.col(i + 1);
    }
    A[iq - 1] = A[iq];
    u(iq - 1) = u(iq);
    A[iq] = 0;
    u(iq) = 0.0;
    for (int j = 0; j < iq; ++j) R(j, iq - 1) = 0.0;
    --iq;
    if (iq == 0) return;
    for (int j = qq; j < iq; ++j) {
      double cc = R(j, j);
      double ss = R(j + 1, j);
      const double h = std::hypot(cc, ss);
      if (std::abs(h) < kEps) continue;
      cc /= h;
      ss /= h;
      R(j + 1, j) = 0.0;
      if (cc < 0.0) {
        R(j, j) = -h;
        cc = -cc;
        ss = -ss;
      } else {
        R(j, j) = h;
      }
      const double xny = ss / (1.0 + cc);
      for (int k = j + 1; k < iq; ++k) {
        const double t1 = R(j, k);
        const double t2 = R(j + 1, k);
        R(j, k) = t1 * cc + t2 * ss;
        R(j + 1, k) = xny * (t1 + R(j, k)) - t2;
      }
      Rotate(j, j + 1, cc, ss);
    }
  }

  // Givens rotation of columns a, b of J in the reflector form used by the
  // dual method.
  void Rotate(int a, int b, double cc, double ss) {
    const double xny = ss / (1.0 + cc);
    tmp = J.col(a);
    J.col(a) = cc * tmp + ss * J.col(b);
    J.col(b) = xny * (tmp + J.col(a)) - J.col(b);
  }

  VectorXd tmp;
};

// z = J₂ d₂ (primal direction), r = R⁻¹ d₁ (dual direction).
void Directions(const ActiveSetFactor& f, const VectorXd& d, int iq, VectorXd& z,
                VectorXd& r) {
  const int n = f.n;
  z = f.J.rightCols(n - iq) * d.tail(n - iq);
  r.resize(iq);
  for (int i = iq - 1; i >= 0; --i) {
    double sum = d(i);
    for (int j = i + 1; j < iq; ++j) sum -= f.R(i, j) * r(j);
    r(i) = sum / f.R(i, i);
  }
}

DenseQpResult SolveWithFactor(ActiveSetFactor f, const VectorXd& x_unc,
                              const VectorXd& a, const MatrixXd& Ce, const VectorXd& be,
                              const MatrixXd& Ci, const VectorXd& bi) {
  const int n = f.n;
  const int me = static_cast<int>(Ce.rows());
  const int mi = static_cast<int>(Ci.rows());
  DenseQpResult out;
  VectorXd x = x_unc;
  double f_value = 0.5 * a.dot(x);
  std::vector<int> A(me + mi + 1, 0);
  std::vector<int> A_old(me + mi + 1, 0);
  VectorXd u = VectorXd::Zero(me + mi + 1);
  VectorXd u_old = u;
  VectorXd d(n), z(n), r;
  int iq = 0;

  for (int i = 0; i < me; ++i) {
    const VectorXd np = Ce.row(i).transpose();
    d = f.J.transpose() * np;
    Directions(f, d, iq, z, r);
    double t2 = 0.0;
    const double znp = z.dot(np);
    if (z.squaredNorm() > kEps) t2 = (be(i) - np.dot(x)) / znp;
    x += t2 * z;
    u(iq) = t2;
    for (int k = 0; k < iq; ++k) u(k) -= t2 * r(k);
    f_value += 0.5 * t2 * t2 * znp;
    A[i] = -i - 1;
    if (!f.Add(d, iq)) {
      out.status = DenseQpResult::Status::kDegenerate;
      out.x = x;
      return out;
    }
  }

  std::vector<int> iai(mi);
  std::vector<bool> iaexcl(mi, true);
  for (int i = 0; i < mi; ++i) iai[i] = i;
  VectorXd s(mi);
  const double ci_scale = mi > 0 ? Ci.cwiseAbs().rowwise().sum().maxCoeff() : 0.0;
  const double bi_scale = mi > 0 ? bi.cwiseAbs().maxCoeff() : 0.0;
  double feas_tol = 0.0;
  const int max_outer = 50 * (n + mi + me) + 100;
  int outer = 0;

  while (true) {
    if (++outer > max_outer) {
      out.status = DenseQpResult::Status::kDegenerate;
      out.x = x;
      return out;
    }
    // Step 1: choose a violated constraint.
    for (int i = me; i < iq; ++i) iai[A[i]] = -1;
    double psi = 0.0;
    s.noalias() = Ci * x;
    s -= bi;
    feas_tol = 1e-11 * (1.0 + bi_scale + ci_scale * x.cwiseAbs().maxCoeff());
    for (int i = 0; i < mi; ++i) {
      iaexcl[i] = true;
      psi = std::min(psi, s(i));
    }
    if (psi >= -feas_tol) break;
    for (int i = 0; i < iq; ++i) {
      u_old(i) = u(i);
      A_old[i] = A[i];
    }
    const VectorXd x_old = x;

  step2:
    double ss = 0.0;
    int ip = -1;
    for (int i = 0; i < mi; ++i) {
      if (s(i) < ss && iai[i] != -1 && iaexcl[i]) {
        ss = s(i);
        ip = i;
      }
    }
    if (ip < 0 || ss >= -feas_tol) break;
    const VectorXd np = Ci.row(ip).transpose();
    u(iq) = 0.0;
    A[iq] = ip;

    while (true) {
      // Step 2a: step direction.
      d = f.J.transpose() * np;
      Directions(f, d, iq, z, r);
      // Step 2b: step length.
      int l = -1;
      double t1 = kInf;
      for (int k = me; k < iq; ++k) {
        if (r(k) > 0.0 && u(k) / r(k) < t1) {
          t1 = u(k) / r(k);
          l = A[k];
        }
      }
      double t2 = kInf;
      const double znp = z.dot(np);
      if (z.squaredNorm() > kEps && znp > 0.0) t2 = -s(ip) / znp;
      const double t = std::min(t1, t2);
      if (t >= kInf) {
        out.status = DenseQpResult::Status::kInfeasible;
        out.x = x;
        return out;
      }
      if (t2 >= kInf) {
        for (int k = 0; k < iq; ++k) u(k) -= t * r(k);
        u(iq) += t;
        iai[l] = l;
        f.Delete(A, u, me, iq, l);
        continue;
      }
      x += t * z;
      f_value += t * znp * (0.5 * t + u(iq));
      for (int k = 0; k < iq; ++k) u(k) -= t * r(k);
      u(iq) += t;
      if (std::abs(t - t2) < kEps * std::max(1.0, std::abs(t2))) {
        if (!f.Add(d, iq)) {
          iaexcl[ip] = false;
          f.Delete(A, u, me, iq, ip);
          for (int i = 0; i < mi; ++i) iai[i] = i;
          for (int i = me; i < iq; ++i) {
            A[i] = A_old[i];
            u(i) = u_old(i);
            iai[A[i]] = -1;
          }
          x = x_old;
          goto step2;
        }
        iai[ip] = -1;
        break;
      }
      // Partial step: drop constraint l and retry with the same ip.
      iai[l] = l;
      f.Delete(A, u, me, iq, l);
      s(ip) = Ci.row(ip).dot(x) - bi(ip);
    }
  }
  out.status = DenseQpResult::Status::kSolved;
  out.x = x;
  out.objective = f_value;
  for (int i = me; i < iq; ++i) out.active_inequalities.push_back(A[i]);
  std::sort(out.active_inequalities.begin(), out.active_inequalities.end());
  return out;
}

void CheckDims(int n, const VectorXd& a, const MatrixXd& Ce, const VectorXd& be,
               const MatrixXd& Ci, const VectorXd& bi) {
  if (a.size() != n || (Ce.rows() > 0 && Ce.cols() != n) || Ce.rows() != be.size() ||
      (Ci.rows() > 0 && Ci.cols() != n) || Ci.rows() != bi.size()) {
    throw std::invalid_argument("dense QP dimension mismatch");
  }
}

}  // namespace

DenseQpResult SolveDenseStrictlyConvexQp(const MatrixXd& G, const VectorXd& a,
                                         const MatrixXd& Ce, const VectorXd& be,
                                         const MatrixXd& Ci, const VectorXd& bi) {
  const int n = static_cast<int>(G.rows());
  CheckDims(n, a, Ce, be, Ci, bi);
  Eigen::LLT<MatrixXd> llt(G);
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument("dense QP hessian is not positive definite");
  }
  ActiveSetFactor f;
  f.n = n;
  const MatrixXd Linv =
      llt.matrixL().solve(MatrixXd::Identity(n, n));
  f.J = Linv.transpose();
  f.R = MatrixXd::Zero(n, n);
  const VectorXd x_unc = -llt.solve(a);
  return SolveWithFactor(std::move(f), x_unc, a, Ce, be, Ci, bi);
}

DenseQpResult SolveDiagonalQp(const VectorXd& g, const VectorXd& a, const MatrixXd& Ce,
                              const VectorXd& be, const MatrixXd& Ci,
                              const VectorXd& bi) {
  const int n = static_cast<int>(g.size());
  CheckDims(n, a, Ce, be, Ci, bi);
  if ((g.array() <= 0.0).any()) {
    throw std::invalid_argument("diagonal QP weights must be positive");
  }
  ActiveSetFactor f;
  f.n = n;
  f.J = g.cwiseSqrt().cwiseInverse().asDiagonal();
  f.R = MatrixXd::Zero(n, n);
  const VectorXd x_unc = -a.cwiseQuotient(g);
  return SolveWithFactor(std::move(f), x_unc, a, Ce, be, Ci, bi);
}

}  // namespace numopt
}  // namespace onpalm
