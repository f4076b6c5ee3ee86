#include "onpalm/c3/c3.h"

#include "onpalm/numopt/dense_qp.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>
#include <functional>
#include <thread>

#include <json.hpp>

namespace onpalm {
namespace c3 {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using numopt::ModeAssignment;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

VectorXd Scaled(double s, std::initializer_list<double> v) {
  VectorXd out(static_cast<int>(v.size()));
  int i = 0;
  for (double e : v) out(i++) = s * e;
  return out;
}

// Index layout of the stacked horizon variables [z_0 .. z_{N-1}, x_N] with
// z_k = [x_k, λ_k, u_k].
struct Layout {
  int nx, nl, nu, N;
  int nz() const { return nx + nl + nu; }
  int n() const { return N * nz() + nx; }
  int x(int k) const { return k * nz(); }
  int lam(int k) const { return k * nz() + nx; }
  int u(int k) const { return k * nz() + nx + nl; }
};

}  // namespace

VectorXd C3Params::StateWeights() const {
  VectorXd w(q_q.size() + q_v.size());
  w << q_q, q_v;
  return w;
}

VectorXd C3Params::TerminalWeights() const {
  return q_f.size() > 0 ? q_f : StateWeights();
}

C3Params C3Params::TrayRetrieval() {
  C3Params p;
  p.N = 5;
  p.dt = 0.075;
  p.q_q = Scaled(50, {150, 150, 150, 0, 1, 1, 0, 15000, 15000, 15000});
  p.q_v = Scaled(50, {5, 5, 15, 10, 10, 1, 5, 5, 5});
  p.r = Scaled(50, {0.15, 0.15, 0.1});
  p.g = {0.1, 10.0, 0.1};
  p.u_weights = {0.1, 10.0, 3.0};
  p.rho = 4.0;
  p.admm_iters = 2;
  p.u_min = Eigen::Vector3d(-10, -10, 0);
  p.u_max = Eigen::Vector3d(10, 10, 30);
  p.ee_min = {0.4, -0.1, 0.35};
  p.ee_max = {0.6, 0.1, 0.7};
  return p;
}

C3Params C3Params::WallRotation() {
  C3Params p;
  p.N = 4;
  p.dt = 0.05;
  p.q_q = Scaled(50, {10, 10, 150, 1000, 1000, 1000, 1000, 25, 25, 15000});
  p.q_v = Scaled(50, {5, 5, 5, 1, 1, 500, 5, 5, 5});
  p.r = Scaled(75, {1.9, 0.5, 0.05});
  p.g = {0.5, 75.0, 1.25};
  p.u_weights = {0.5, 50.0, 15.0};
  p.rho = 5.0;
  p.admm_iters = 3;
  p.u_min = Eigen::Vector3d(-10, -10, 0);
  p.u_max = Eigen::Vector3d(10, 10, 30);
  p.ee_min = {0.45, -0.2, 0.4};
  p.ee_max = {0.7, 0.2, 0.5};
  return p;
}

std::vector<std::string> Validate(const C3Params& p, int nx, int nu) {
  std::vector<std::string> out;
  if (p.N < 2) out.push_back("N must be >= 2");
  if (!(p.dt > 0.0)) out.push_back("dt must be positive");
  if (p.admm_iters < 1) out.push_back("admm_iters must be >= 1");
  if (!(p.rho > 0.0)) out.push_back("rho must be positive");
  if (p.q_q.size() + p.q_v.size() != nx) {
    out.push_back("state weights have " + std::to_string(p.q_q.size() + p.q_v.size()) +
                  " entries, expected " + std::to_string(nx));
  }
  if (p.q_f.size() != 0 && p.q_f.size() != nx) out.push_back("q_f has wrong size");
  if (p.r.size() != nu) out.push_back("R has wrong size");
  auto nonneg = [&](const char* name, const VectorXd& v) {
    if ((v.array() < 0.0).any() || !v.allFinite()) {
      out.push_back(std::string(name) + " must be finite and >= 0");
    }
  };
  nonneg("Q_q", p.q_q);
  nonneg("Q_v", p.q_v);
  nonneg("Q_f", p.q_f);
  nonneg("R", p.r);
  for (double w : {p.g.x, p.g.lambda, p.g.u}) {
    if (w < 0.0) out.push_back("G weights must be >= 0");
  }
  for (double w : {p.u_weights.x, p.u_weights.lambda, p.u_weights.u}) {
    if (!(w > 0.0)) out.push_back("U weights must be > 0");
  }
  if (p.u_min.size() != nu || p.u_max.size() != nu) {
    out.push_back("input bounds have wrong size");
  } else if ((p.u_min.array() > p.u_max.array()).any()) {
    out.push_back("input bounds are not ordered");
  }
  if (p.has_workspace && (nx < 3 || (p.ee_min.array() > p.ee_max.array()).any())) {
    out.push_back("workspace bounds are not ordered");
  }
  if (p.projection_threads < 1) out.push_back("projection_threads must be >= 1");
  return out;
}

double PlanCost(const C3Solution& sol, const VectorXd& target, const C3Params& p) {
  const VectorXd q = p.StateWeights();
  const VectorXd qf = p.TerminalWeights();
  double cost = 0.0;
  for (int k = 0; k < sol.N(); ++k) {
    const VectorXd e = sol.x[k] - target;
    cost += e.dot(q.cwiseProduct(e)) + sol.u[k].dot(p.r.cwiseProduct(sol.u[k]));
  }
  const VectorXd e = sol.x.back() - target;
  return cost + e.dot(qf.cwiseProduct(e));
}

void WarmStartCache::ShiftOneKnot(int nx, int nl, int nu) {
  const int nz = nx + nl + nu;
  for (auto& [key, warm] : qp_) {
    VectorXd& z = warm.primal;
    const int n = static_cast<int>(z.size());
    if (n < nx || (n - nx) % nz != 0) continue;
    const int N = (n - nx) / nz;
    if (N < 1) continue;
    VectorXd s = z;
    for (int k = 0; k + 1 < N; ++k) s.segment(k * nz, nz) = z.segment((k + 1) * nz, nz);
    s.segment((N - 1) * nz, nx) = z.tail(nx);
    warm.dual.setZero();
    z = s;
  }
  // Keys end in the knot index: "<prefix>/<k>".
  std::map<std::string, ModeAssignment> shifted;
  for (const auto& [key, modes] : modes_) {
    const size_t slash = key.rfind('/');
    if (slash == std::string::npos) continue;
    const int k = std::stoi(key.substr(slash + 1));
    const std::string prefix = key.substr(0, slash + 1);
    if (k >= 1) shifted[prefix + std::to_string(k - 1)] = modes;
    if (!shifted.count(key)) shifted[key] = modes;
  }
  modes_ = std::move(shifted);
  for (auto* v : {&copies_, &duals_}) {
    if (v->size() < 2) continue;
    v->erase(v->begin());
    v->push_back(v->back());
  }
}

bool WarmStartCache::HasConsensus(int knots, int nz) const {
  return static_cast<int>(copies_.size()) == knots && static_cast<int>(duals_.size()) == knots &&
         knots > 0 && copies_.front().size() == nz;
}

void WarmStartCache::StoreConsensus(std::vector<VectorXd> copies, std::vector<VectorXd> duals) {
  copies_ = std::move(copies);
  duals_ = std::move(duals);
}

const numopt::QpWarmStart* WarmStartCache::Qp(const std::string& key, int n, int m) const {
  const auto it = qp_.find(key);
  if (it == qp_.end() || it->second.primal.size() != n || it->second.dual.size() != m) {
    return nullptr;
  }
  return &it->second;
}

void WarmStartCache::StoreQp(const std::string& key, numopt::QpWarmStart warm) {
  qp_[key] = std::move(warm);
}

const ModeAssignment* WarmStartCache::Modes(const std::string& key, int pairs) const {
  const auto it = modes_.find(key);
  if (it == modes_.end() || static_cast<int>(it->second.size()) != pairs) return nullptr;
  return &it->second;
}

void WarmStartCache::StoreModes(const std::string& key, ModeAssignment modes) {
  modes_[key] = std::move(modes);
}

void DualAndScaleUpdate(const std::vector<VectorXd>& copies, const std::vector<VectorXd>& iterate,
                        std::vector<VectorXd>& duals, VectorXd& g_diag, double rho) {
  if (copies.size() != iterate.size() || copies.size() != duals.size()) {
    throw std::invalid_argument("dual update: knot counts differ");
  }
  for (size_t k = 0; k < copies.size(); ++k) duals[k] += iterate[k] - copies[k];
  g_diag *= rho;
}

namespace {

class HorizonQp {
 public:
  HorizonQp(const lcs::Lcs& m, const VectorXd& x0, const VectorXd& target, const C3Params& p)
      : L_{m.num_states(), m.num_lambdas(), m.num_inputs(), p.N} {
    const int n = L_.n();
    const int nx = L_.nx;
    const VectorXd q = p.StateWeights();
    const VectorXd qf = p.TerminalWeights();
    base_diag_ = VectorXd::Zero(n);
    base_linear_ = VectorXd::Zero(n);
    for (int k = 0; k < p.N; ++k) {
      base_diag_.segment(L_.x(k), nx) = 2.0 * q;
      base_linear_.segment(L_.x(k), nx) = -2.0 * q.cwiseProduct(target);
      base_diag_.segment(L_.u(k), L_.nu) = 2.0 * p.r;
    }
    base_diag_.tail(nx) = 2.0 * qf;
    base_linear_.tail(nx) = -2.0 * qf.cwiseProduct(target);

    using Trip = Eigen::Triplet<double>;
    std::vector<Trip> eq;
    VectorXd beq(nx * (p.N + 1));
    for (int i = 0; i < nx; ++i) eq.emplace_back(i, L_.x(0) + i, 1.0);
    beq.head(nx) = x0;
    auto dense_block = [](std::vector<Trip>& t, int r0, int c0, const MatrixXd& M, double s) {
      for (int i = 0; i < M.rows(); ++i) {
        for (int j = 0; j < M.cols(); ++j) {
          if (M(i, j) != 0.0) t.emplace_back(r0 + i, c0 + j, s * M(i, j));
        }
      }
    };
    for (int k = 0; k < p.N; ++k) {
      const int r = nx * (k + 1);
      const int next = k + 1 < p.N ? L_.x(k + 1) : N_x();
      for (int i = 0; i < nx; ++i) eq.emplace_back(r + i, next + i, 1.0);
      dense_block(eq, r, L_.x(k), m.A, -1.0);
      dense_block(eq, r, L_.lam(k), m.D, -1.0);
      dense_block(eq, r, L_.u(k), m.B, -1.0);
      beq.segment(r, nx) = m.d;
    }
    prog_.eq_matrix.resize(nx * (p.N + 1), n);
    prog_.eq_matrix.setFromTriplets(eq.begin(), eq.end());
    prog_.eq_rhs = beq;

    std::vector<Trip> in;
    VectorXd bin(L_.nl * p.N);
    for (int k = 0; k < p.N; ++k) {
      const int r = L_.nl * k;
      dense_block(in, r, L_.x(k), m.E, 1.0);
      dense_block(in, r, L_.lam(k), m.F, 1.0);
      dense_block(in, r, L_.u(k), m.H, 1.0);
      bin.segment(r, L_.nl) = -m.c;
    }
    prog_.ineq_matrix.resize(L_.nl * p.N, n);
    prog_.ineq_matrix.setFromTriplets(in.begin(), in.end());
    prog_.ineq_rhs = bin;

    prog_.lower = VectorXd::Constant(n, -kInf);
    prog_.upper = VectorXd::Constant(n, kInf);
    for (int k = 0; k < p.N; ++k) {
      prog_.lower.segment(L_.lam(k), L_.nl).setZero();
      prog_.lower.segment(L_.u(k), L_.nu) = p.u_min;
      prog_.upper.segment(L_.u(k), L_.nu) = p.u_max;
    }
    if (p.has_workspace) {
      for (int k = 1; k <= p.N; ++k) {
        const int xi = k < p.N ? L_.x(k) : N_x();
        prog_.lower.segment<3>(xi) = p.ee_min;
        prog_.upper.segment<3>(xi) = p.ee_max;
      }
    }
    num_bound_rows_ = 0;
    for (int i = 0; i < n; ++i) {
      if (std::isfinite(prog_.lower(i)) || std::isfinite(prog_.upper(i))) ++num_bound_rows_;
    }
  }

  // Condensed form over y = [λ_0, u_0, .., λ_{N-1}, u_{N-1}] with
  // x_k = S_k y + s_k for k ≥ 1. Built lazily; only the cost changes between
  // ADMM rounds.
  void Condense(const lcs::Lcs& m, const VectorXd& x0, const VectorXd& target,
                const C3Params& p) {
    const int nx = L_.nx, nl = L_.nl, nu = L_.nu, N = L_.N;
    const int nk = nl + nu;
    ny_ = N * nk;
    MatrixXd DB(nx, nk);
    DB << m.D, m.B;
    S_.assign(N + 1, MatrixXd::Zero(nx, ny_));
    s_.assign(N + 1, x0);
    for (int k = 1; k <= N; ++k) {
      S_[k] = m.A * S_[k - 1];
      S_[k].middleCols((k - 1) * nk, nk) += DB;
      s_[k] = m.A * s_[k - 1] + m.d;
    }
    const VectorXd q = p.StateWeights();
    const VectorXd qf = p.TerminalWeights();
    H0_ = MatrixXd::Zero(ny_, ny_);
    g0_ = VectorXd::Zero(ny_);
    gram_ = MatrixXd::Zero(ny_, ny_);
    for (int k = 1; k <= N; ++k) {
      const VectorXd w = 2.0 * (k < N ? q : qf);
      H0_.noalias() += S_[k].transpose() * w.asDiagonal() * S_[k];
      g0_.noalias() += S_[k].transpose() * w.cwiseProduct(s_[k] - target);
      if (k < N) gram_.noalias() += S_[k].transpose() * S_[k];
    }
    for (int k = 0; k < N; ++k) {
      for (int i = 0; i < nu; ++i) H0_(k * nk + nl + i, k * nk + nl + i) += 2.0 * p.r(i);
    }
    std::vector<Eigen::RowVectorXd> rows;
    std::vector<double> rhs;
    for (int k = 0; k < N; ++k) {
      MatrixXd W = m.E * S_[k];
      W.middleCols(k * nk, nl) += m.F;
      W.middleCols(k * nk + nl, nu) += m.H;
      const VectorXd b = -m.c - m.E * s_[k];
      for (int i = 0; i < nl; ++i) {
        rows.push_back(W.row(i));
        rhs.push_back(b(i));
      }
    }
    for (int k = 0; k < N; ++k) {
      for (int i = 0; i < nl; ++i) {
        Eigen::RowVectorXd r = Eigen::RowVectorXd::Zero(ny_);
        r(k * nk + i) = 1.0;
        rows.push_back(r);
        rhs.push_back(0.0);
      }
      for (int i = 0; i < nu; ++i) {
        Eigen::RowVectorXd r = Eigen::RowVectorXd::Zero(ny_);
        r(k * nk + nl + i) = 1.0;
        if (std::isfinite(p.u_min(i))) {
          rows.push_back(r);
          rhs.push_back(p.u_min(i));
        }
        if (std::isfinite(p.u_max(i))) {
          rows.push_back(-r);
          rhs.push_back(-p.u_max(i));
        }
      }
    }
    if (p.has_workspace) {
      for (int k = 1; k <= N; ++k) {
        for (int i = 0; i < 3; ++i) {
          rows.push_back(S_[k].row(i));
          rhs.push_back(p.ee_min(i) - s_[k](i));
          rows.push_back(-S_[k].row(i));
          rhs.push_back(s_[k](i) - p.ee_max(i));
        }
      }
    }
    Ci_.resize(static_cast<int>(rows.size()), ny_);
    bi_.resize(static_cast<int>(rows.size()));
    for (size_t i = 0; i < rows.size(); ++i) {
      Ci_.row(static_cast<int>(i)) = rows[i];
      bi_(static_cast<int>(i)) = rhs[i];
    }
  }

  // Returns false when the active-set solver reports degeneracy; the caller
  // then falls back to the sparse solver.
  bool SolveCondensed(const VectorXd& g_diag, const std::vector<VectorXd>& copies,
                      const std::vector<VectorXd>& duals, numopt::QpResult& out) const {
    const int nx = L_.nx, nl = L_.nl, nu = L_.nu, N = L_.N;
    const int nk = nl + nu;
    MatrixXd H = H0_;
    VectorXd g = g0_;
    const double gx = g_diag.size() > 0 ? g_diag(0) : 0.0;
    if (nx > 0 && gx != 0.0) {
      H += 2.0 * gx * gram_;
      for (int k = 1; k < N; ++k) {
        g.noalias() += 2.0 * gx * S_[k].transpose() * (s_[k] - (copies[k] - duals[k]).head(nx));
      }
    }
    for (int k = 0; k < N; ++k) {
      const VectorXd c = copies[k] - duals[k];
      for (int i = 0; i < nk; ++i) {
        const double w = g_diag(nx + i);
        H(k * nk + i, k * nk + i) += 2.0 * w;
        g(k * nk + i) -= 2.0 * w * c(nx + i);
      }
    }
    // Forces that no cost term touches (e.g. G = 0) get a tiny ridge so the
    // Hessian stays positive definite.
    const double ridge = 1e-10 * std::max(1.0, H.diagonal().maxCoeff());
    for (int i = 0; i < ny_; ++i) H(i, i) += ridge;
    numopt::DenseQpResult r;
    try {
      r = numopt::SolveDenseStrictlyConvexQp(H, g, MatrixXd(0, ny_), VectorXd(0), Ci_, bi_);
    } catch (const std::invalid_argument&) {
      return false;
    }
    if (r.status == numopt::DenseQpResult::Status::kDegenerate) return false;
    out.status = r.status == numopt::DenseQpResult::Status::kSolved
                     ? numopt::QpStatus::kSolved
                     : numopt::QpStatus::kInfeasible;
    out.iterations = static_cast<int>(r.active_inequalities.size());
    out.z = VectorXd::Zero(L_.n());
    for (int k = 0; k <= N; ++k) {
      const VectorXd xk = S_[k] * r.x + s_[k];
      out.z.segment(k < N ? L_.x(k) : N * L_.nz(), nx) = xk;
      if (k < N) out.z.segment(L_.lam(k), nk) = r.x.segment(k * nk, nk);
    }
    return true;
  }

  const Layout& layout() const { return L_; }
  int num_dual() const { return prog_.num_eq() + prog_.num_ineq() + num_bound_rows_; }

  // Consensus term Σ‖z_k − δ_k + w_k‖²_G; pass g = 0 to drop it.
  numopt::QpResult Solve(const VectorXd& g_diag, const std::vector<VectorXd>& copies,
                         const std::vector<VectorXd>& duals, const numopt::QpSettings& s,
                         const numopt::QpWarmStart* warm) {
    VectorXd diag = base_diag_;
    VectorXd lin = base_linear_;
    for (int k = 0; k < L_.N; ++k) {
      diag.segment(L_.x(k), L_.nz()) += 2.0 * g_diag;
      lin.segment(L_.x(k), L_.nz()) -= 2.0 * g_diag.cwiseProduct(copies[k] - duals[k]);
    }
    prog_.hessian.resize(L_.n(), L_.n());
    std::vector<Eigen::Triplet<double>> t;
    for (int i = 0; i < L_.n(); ++i) t.emplace_back(i, i, diag(i));
    prog_.hessian.setFromTriplets(t.begin(), t.end());
    prog_.linear_cost = lin;
    return numopt::SolveQp(prog_, s, warm);
  }

  std::vector<VectorXd> Knots(const VectorXd& z) const {
    std::vector<VectorXd> out(L_.N);
    for (int k = 0; k < L_.N; ++k) out[k] = z.segment(L_.x(k), L_.nz());
    return out;
  }

  // Largest violation of the returned point, named for the error message.
  std::string DescribeViolation(const VectorXd& z) const {
    double worst = 0.0;
    std::ostringstream os;
    auto consider = [&](double v, const std::string& what) {
      if (v > worst) {
        worst = v;
        os.str("");
        os << what << " violated by " << v;
      }
    };
    const Layout& L = L_;
    auto name = [&L](int i) {
      const int k = std::min(i / L.nz(), L.N);
      const int r = i - k * L.nz();
      std::string block = "x";
      int idx = r;
      if (k < L.N && r >= L.nx + L.nl) {
        block = "u";
        idx = r - L.nx - L.nl;
      } else if (k < L.N && r >= L.nx) {
        block = "lambda";
        idx = r - L.nx;
      }
      return block + "[" + std::to_string(k) + "][" + std::to_string(idx) + "]";
    };
    for (int i = 0; i < L_.n(); ++i) {
      std::ostringstream b;
      b << name(i) << " lower bound " << prog_.lower(i);
      consider(prog_.lower(i) - z(i), b.str());
      std::ostringstream c;
      c << name(i) << " upper bound " << prog_.upper(i);
      consider(z(i) - prog_.upper(i), c.str());
    }
    const VectorXd eq = prog_.eq_matrix * z - prog_.eq_rhs;
    for (int i = 0; i < eq.size(); ++i) {
      consider(std::abs(eq(i)), (i < L_.nx ? "initial state row " : "dynamics row ") +
                                    std::to_string(i));
    }
    const VectorXd in = prog_.ineq_matrix * z - prog_.ineq_rhs;
    for (int i = 0; i < in.size(); ++i) consider(-in(i), "gap row " + std::to_string(i));
    return worst > 0.0 ? os.str() : std::string("no single violated bound identified");
  }

 private:
  int N_x() const { return L_.N * L_.nz(); }

  Layout L_;
  numopt::QuadProgram prog_;
  int ny_{0};
  std::vector<MatrixXd> S_;
  std::vector<VectorXd> s_;
  MatrixXd H0_;
  VectorXd g0_;
  MatrixXd gram_;
  MatrixXd Ci_;
  VectorXd bi_;
  VectorXd base_diag_;
  VectorXd base_linear_;
  int num_bound_rows_{0};
};

double KnotResidual(const lcs::Lcs& m, const VectorXd& z) {
  const int nx = m.num_states();
  const int nl = m.num_lambdas();
  if (nl == 0) return 0.0;
  const VectorXd lam = z.segment(nx, nl);
  const VectorXd s = m.Slack(z.head(nx), z.tail(m.num_inputs()), lam);
  double r = 0.0;
  for (int i = 0; i < nl; ++i) r = std::max(r, std::abs(std::min(lam(i), s(i))));
  return r;
}

}  // namespace

C3Solution Solve(const lcs::Lcs& model, const VectorXd& x0, const VectorXd& target,
                 const C3Params& params, WarmStartCache* cache) {
  const auto start = std::chrono::steady_clock::now();
  if (const auto errs = lcs::Validate(model); !errs.empty()) {
    throw std::invalid_argument("c3: invalid LCS: " + errs.front());
  }
  const int nx = model.num_states(), nl = model.num_lambdas(), nu = model.num_inputs();
  if (const auto errs = Validate(params, nx, nu); !errs.empty()) {
    throw std::invalid_argument("c3: invalid params: " + errs.front());
  }
  if (x0.size() != nx || !x0.allFinite()) throw std::invalid_argument("c3: x0 invalid");
  if (target.size() != nx || !target.allFinite()) {
    throw std::invalid_argument("c3: target invalid");
  }

  HorizonQp qp(model, x0, target, params);
  if (params.qp_backend == QpBackend::kActiveSet) qp.Condense(model, x0, target, params);
  const Layout L = qp.layout();
  const int nz = L.nz();
  const int N = params.N;

  VectorXd g_diag(nz);
  g_diag << VectorXd::Constant(nx, params.g.x), VectorXd::Constant(nl, params.g.lambda),
      VectorXd::Constant(nu, params.g.u);
  VectorXd u_diag(nz);
  u_diag << VectorXd::Constant(nx, params.u_weights.x),
      VectorXd::Constant(nl, params.u_weights.lambda), VectorXd::Constant(nu, params.u_weights.u);

  MatrixXd W(nl, nz);
  W << model.E, model.F, model.H;
  std::vector<int> force_index(nl);
  for (int i = 0; i < nl; ++i) force_index[i] = nx + i;

  C3Solution sol;
  sol.dt = params.dt;
  std::vector<VectorXd> copies(N, VectorXd::Zero(nz));
  std::vector<VectorXd> duals(N, VectorXd::Zero(nz));
  sol.modes.assign(N, {});
  sol.projection_flags.assign(N, numopt::ProjectionFlag::kExact);

  using Clock = std::chrono::steady_clock;
  auto seconds_since = [](Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
  };
  auto qp_step = [&](int iter, const VectorXd& g) {
    const auto t0 = Clock::now();
    struct Timer {
      double& acc;
      Clock::time_point t0;
      std::function<double(Clock::time_point)> since;
      ~Timer() { acc += since(t0); }
    } timer{sol.qp_time, t0, seconds_since};
    const std::string key = "qp/" + std::to_string(iter);
    numopt::QpResult r;
    if (params.qp_backend == QpBackend::kActiveSet && qp.SolveCondensed(g, copies, duals, r)) {
      sol.qp_iterations += r.iterations;
      return r;
    }
    const numopt::QpWarmStart* warm =
        cache != nullptr ? cache->Qp(key, L.n(), qp.num_dual()) : nullptr;
    r = qp.Solve(g, copies, duals, params.qp, warm);
    sol.qp_iterations += r.iterations;
    if (cache != nullptr && r.status != numopt::QpStatus::kInfeasible) {
      cache->StoreQp(key, r.AsWarmStart());
    }
    return r;
  };

  // Without copies from an earlier solve only the force block of the
  // consensus term is kept, pulling λ toward zero.
  VectorXd g_first = VectorXd::Zero(nz);
  g_first.segment(nx, nl) = g_diag.segment(nx, nl);
  if (params.consensus_warm_start && cache != nullptr && cache->HasConsensus(N, nz)) {
    copies = cache->copies();
    duals = cache->duals();
    copies[0].head(nx) = x0;
    g_first = g_diag;
  }
  numopt::QpResult r = qp_step(0, g_first);
  if (r.status == numopt::QpStatus::kInfeasible) {
    sol.status = C3Status::kInfeasible;
    sol.error = "horizon QP infeasible: " + qp.DescribeViolation(r.z);
    sol.solve_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return sol;
  }

  for (int iter = 0; iter < params.admm_iters; ++iter) {
    const std::vector<VectorXd> z = qp.Knots(r.z);
    const auto t_proj = Clock::now();
    std::vector<int> nodes(N, 0);
    auto project = [&](int k) {
      const VectorXd target_k = z[k] + duals[k];
      if (nl == 0) {
        copies[k] = target_k;
        return;
      }
      // x₀ is data: the first copy keeps it and projects only (λ, u).
      const bool pinned = k == 0 && params.pin_initial_state;
      numopt::ComplementarityProjection prob;
      if (pinned) {
        prob.weights = u_diag.tail(nl + nu);
        prob.target = target_k.tail(nl + nu);
        prob.slack_matrix = W.rightCols(nl + nu);
        prob.slack_offset = model.c + model.E * x0;
        prob.force_index.resize(nl);
        for (int i = 0; i < nl; ++i) prob.force_index[i] = i;
      } else {
        prob.weights = u_diag;
        prob.target = target_k;
        prob.slack_matrix = W;
        prob.slack_offset = model.c;
        prob.force_index = force_index;
      }
      const std::string key = "proj/" + std::to_string(iter) + "/" + std::to_string(k);
      const ModeAssignment* hint = cache != nullptr ? cache->Modes(key, nl) : nullptr;
      const numopt::ProjectionResult pr =
          numopt::ProjectComplementarity(prob, params.projection, hint);
      if (pr.status == numopt::ProjectionStatus::kInfeasibleKnot) {
        copies[k] = target_k;
        sol.modes[k].clear();
        sol.projection_flags[k] = numopt::ProjectionFlag::kIncumbent;
        return;
      }
      nodes[k] = pr.nodes;
      if (pinned) {
        copies[k] << x0, pr.delta;
      } else {
        copies[k] = pr.delta;
      }
      sol.modes[k] = pr.modes;
      sol.projection_flags[k] = pr.flag;
    };
    if (params.projection_threads > 1 && nl > 0) {
      std::vector<std::thread> pool;
      const int T = std::min(params.projection_threads, N);
      for (int t = 0; t < T; ++t) {
        pool.emplace_back([&, t] {
          for (int k = t; k < N; k += T) project(k);
        });
      }
      for (std::thread& th : pool) th.join();
    } else {
      for (int k = 0; k < N; ++k) project(k);
    }
    sol.projection_time += seconds_since(t_proj);
    for (int k = 0; k < N; ++k) {
      sol.projection_nodes += nodes[k];
      if (nl > 0 && sol.modes[k].empty()) ++sol.infeasible_knot_fallbacks;
      if (cache != nullptr && !sol.modes[k].empty()) {
        cache->StoreModes("proj/" + std::to_string(iter) + "/" + std::to_string(k),
                          sol.modes[k]);
      }
    }
    DualAndScaleUpdate(copies, z, duals, g_diag, params.rho);
    // Scaled duals: w ← w/ρ keeps the multiplier G·w fixed as G grows.
    if (params.rescale_duals) {
      for (VectorXd& w : duals) w /= params.rho;
    }
    r = qp_step(iter + 1, g_diag);
    if (r.status == numopt::QpStatus::kInfeasible) {
      sol.status = C3Status::kInfeasible;
      sol.error = "horizon QP infeasible after projection: " + qp.DescribeViolation(r.z);
      break;
    }
  }

  sol.x.resize(N + 1);
  sol.u.resize(N);
  sol.lambda.resize(N);
  sol.complementarity_residual.resize(N);
  for (int k = 0; k < N; ++k) {
    const VectorXd zk = r.z.segment(L.x(k), nz);
    sol.x[k] = zk.head(nx);
    sol.lambda[k] = zk.segment(nx, nl);
    sol.u[k] = zk.tail(nu);
    sol.complementarity_residual[k] = KnotResidual(model, zk);
  }
  sol.x[N] = r.z.tail(nx);
  if (cache != nullptr && sol.status == C3Status::kOk) cache->StoreConsensus(copies, duals);
  sol.copies = std::move(copies);
  sol.duals = std::move(duals);
  sol.objective = PlanCost(sol, target, params);
  sol.solve_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return sol;
}

LatencyEstimator::LatencyEstimator(double initial, double coefficient)
    : value_(std::max(0.0, initial)), coefficient_(coefficient) {
  if (coefficient < 0.0 || coefficient > 1.0) {
    throw std::invalid_argument("latency EMA coefficient must lie in [0, 1]");
  }
}

void LatencyEstimator::Update(double solve_time) {
  value_ = coefficient_ * value_ + (1.0 - coefficient_) * std::max(0.0, solve_time);
}

VectorXd PredictInitialState(const C3Solution& plan, const VectorXd& measured, double latency,
                             int ee_velocity_index) {
  if (plan.x.size() < 2) throw std::invalid_argument("predict: empty plan");
  VectorXd x0 = measured;
  const double horizon = plan.dt * plan.N();
  const double t = std::clamp(latency, 0.0, horizon);
  const int k = std::min(static_cast<int>(t / plan.dt), plan.N() - 1);
  const double a = (t - k * plan.dt) / plan.dt;
  const VectorXd x = (1.0 - a) * plan.x[k] + a * plan.x[k + 1];
  x0.head<3>() = x.head<3>();
  x0.segment<3>(ee_velocity_index) = x.segment<3>(ee_velocity_index);
  return x0;
}

std::string DiagnosticsJsonLine(const C3Solution& sol, double t) {
  nlohmann::json j;
  j["t"] = t;
  j["status"] = sol.status == C3Status::kOk ? "OK" : "INFEASIBLE";
  if (!sol.error.empty()) j["error"] = sol.error;
  j["solve_time"] = sol.solve_time;
  j["objective"] = sol.objective;
  j["qp_iterations"] = sol.qp_iterations;
  j["qp_time"] = sol.qp_time;
  j["projection_time"] = sol.projection_time;
  j["projection_nodes"] = sol.projection_nodes;
  j["complementarity_residual"] = sol.complementarity_residual;
  j["infeasible_knot_fallbacks"] = sol.infeasible_knot_fallbacks;
  std::vector<std::string> modes;
  for (const ModeAssignment& m : sol.modes) {
    std::string s;
    for (numopt::PairMode p : m) s += p == numopt::PairMode::kForceZero ? '0' : '1';
    modes.push_back(s);
  }
  j["modes"] = modes;
  std::vector<std::string> flags;
  for (numopt::ProjectionFlag f : sol.projection_flags) flags.emplace_back(numopt::ToString(f));
  j["projection_flags"] = flags;
  return j.dump();
}

}  // namespace c3
}  // namespace onpalm
