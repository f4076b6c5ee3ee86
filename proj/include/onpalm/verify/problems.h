#pragma once

#include <limits>
#include <random>

#include <Eigen/Dense>

namespace onpalm {
namespace verify {

// Contact LCPs with M built the way a time-stepper builds it: one body with
// random inertia, point contacts with random frames, 4 pyramid rays each, so
// M = dt·R M⁻¹ Rᵀ. q is planted from a random complementary pair (λ*, w*),
// which guarantees a solution exists; about half the rays are active.
inline void RandomContactLcp(std::mt19937& rng, int rays, Eigen::MatrixXd& M,
                             Eigen::VectorXd& q) {
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  std::uniform_real_distribution<double> pos(0.2, 2.0);
  const int nv = 6;
  const double dt = 0.01;
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(nv, nv);
  for (int i = 0; i < nv; ++i) {
    for (int j = 0; j < i; ++j) L(i, j) = 0.3 * uni(rng);
    L(i, i) = pos(rng);
  }
  const Eigen::MatrixXd Minv = (L * L.transpose()).inverse();
  const int contacts = (rays + 3) / 4;
  Eigen::MatrixXd R(4 * contacts, nv);
  std::uniform_real_distribution<double> mu_dist(0.0, 1.0);
  for (int c = 0; c < contacts; ++c) {
    Eigen::VectorXd jn(nv), t1(nv), t2(nv);
    for (int i = 0; i < nv; ++i) {
      jn(i) = uni(rng);
      t1(i) = uni(rng);
      t2(i) = uni(rng);
    }
    const double mu = mu_dist(rng);
    R.row(4 * c + 0) = (jn + mu * t1).transpose();
    R.row(4 * c + 1) = (jn - mu * t1).transpose();
    R.row(4 * c + 2) = (jn + mu * t2).transpose();
    R.row(4 * c + 3) = (jn - mu * t2).transpose();
  }
  const Eigen::MatrixXd Rk = R.topRows(rays);
  M = dt * Rk * Minv * Rk.transpose();
  Eigen::VectorXd lam = Eigen::VectorXd::Zero(rays);
  Eigen::VectorXd w = Eigen::VectorXd::Zero(rays);
  std::uniform_real_distribution<double> mag(0.0, 1.0);
  for (int i = 0; i < rays; ++i) {
    if (mag(rng) < 0.5) {
      lam(i) = mag(rng);
    } else {
      w(i) = mag(rng);
    }
  }
  q = w - M * lam;
}

inline Eigen::MatrixXd RandomPsd(std::mt19937& rng, int n, int rank) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd B(n, rank);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < rank; ++j) B(i, j) = g(rng);
  }
  return B * B.transpose();
}

inline Eigen::VectorXd RandomVector(std::mt19937& rng, int n, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = g(rng);
  return v;
}

// Brute-force strictly convex QP: min ½xᵀGx + aᵀx, Ce x = be, Ci x ≥ bi.
// Tries every active subset of the inequalities, solves the KKT system and
// keeps the feasible, dual-feasible candidate with the lowest objective.
// Exponential in Ci.rows(); for small instances only.
inline bool BruteForceQp(const Eigen::MatrixXd& G, const Eigen::VectorXd& a,
                         const Eigen::MatrixXd& Ce, const Eigen::VectorXd& be,
                         const Eigen::MatrixXd& Ci, const Eigen::VectorXd& bi,
                         Eigen::VectorXd& x_best, double& f_best) {
  const int n = static_cast<int>(G.rows());
  const int me = static_cast<int>(Ce.rows());
  const int mi = static_cast<int>(Ci.rows());
  f_best = std::numeric_limits<double>::infinity();
  for (int mask = 0; mask < (1 << mi); ++mask) {
    int k = 0;
    for (int i = 0; i < mi; ++i) k += (mask >> i) & 1;
    const int m = me + k;
    Eigen::MatrixXd A(m, n);
    Eigen::VectorXd b(m);
    A.topRows(me) = Ce;
    b.head(me) = be;
    int r = me;
    for (int i = 0; i < mi; ++i) {
      if ((mask >> i) & 1) {
        A.row(r) = Ci.row(i);
        b(r) = bi(i);
        ++r;
      }
    }
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n + m, n + m);
    K.topLeftCorner(n, n) = G;
    K.topRightCorner(n, m) = -A.transpose();
    K.bottomLeftCorner(m, n) = A;
    Eigen::VectorXd rhs(n + m);
    rhs.head(n) = -a;
    rhs.tail(m) = b;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(K);
    if (lu.rank() < n + m) continue;
    const Eigen::VectorXd sol = lu.solve(rhs);
    const Eigen::VectorXd x = sol.head(n);
    const Eigen::VectorXd mult = sol.tail(m);
    if (k > 0 && mult.tail(k).minCoeff() < -1e-9) continue;
    if (mi > 0 && (Ci * x - bi).minCoeff() < -1e-9) continue;
    const double f = 0.5 * x.dot(G * x) + a.dot(x);
    if (f < f_best) {
      f_best = f;
      x_best = x;
    }
  }
  return f_best < std::numeric_limits<double>::infinity();
}

}  // namespace verify
}  // namespace onpalm
