#include "onpalm/numopt/lcp_solver.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace onpalm {
namespace numopt {

using Eigen::MatrixXd;
using Eigen::VectorXd;

std::string_view ToString(LcpStatus status) {
  switch (status) {
    case LcpStatus::kSolved:
      return "SOLVED";
    case LcpStatus::kNoSolution:
      return "NO_SOLUTION";
  }
  return "UNKNOWN";
}

double LcpResidual(const LinCompProblem& p, const VectorXd& lambda) {
  const VectorXd w = p.M * lambda + p.q;
  double r = 0.0;
  for (int i = 0; i < lambda.size(); ++i) {
    r = std::max({r, std::abs(lambda(i) * w(i)), -lambda(i), -w(i)});
  }
  return r;
}

namespace {

void CheckProblem(const LinCompProblem& p) {
  if (p.M.rows() != p.M.cols() || p.M.rows() != p.q.size()) {
    throw std::invalid_argument("LCP matrix must be square and match q");
  }
  if (!p.M.allFinite() || !p.q.allFinite()) {
    throw std::invalid_argument("LCP data has non-finite entries");
  }
}

LcpResult Finish(const LinCompProblem& p, VectorXd lambda, double tol, int iterations) {
  LcpResult out;
  out.lambda = std::move(lambda);
  out.slack = p.M * out.lambda + p.q;
  out.residual = LcpResidual(p, out.lambda);
  out.iterations = iterations;
  out.status = out.residual <= tol ? LcpStatus::kSolved : LcpStatus::kNoSolution;
  return out;
}

// λ_S solving M_SS λ_S = −q_S, zero elsewhere. Returns false when the
// reduced system is inconsistent.
bool SolveSupport(const LinCompProblem& p, const std::vector<int>& support, bool min_norm,
                  VectorXd& lambda) {
  const int n = static_cast<int>(p.q.size());
  const int k = static_cast<int>(support.size());
  lambda = VectorXd::Zero(n);
  if (k == 0) return true;
  MatrixXd Mss(k, k);
  VectorXd qs(k);
  for (int i = 0; i < k; ++i) {
    qs(i) = p.q(support[i]);
    for (int j = 0; j < k; ++j) Mss(i, j) = p.M(support[i], support[j]);
  }
  VectorXd ls;
  if (min_norm) {
    ls = Mss.completeOrthogonalDecomposition().solve(-qs);
  } else {
    ls = Mss.fullPivLu().solve(-qs);
  }
  const double scale = 1.0 + qs.cwiseAbs().maxCoeff();
  if (!ls.allFinite() || (Mss * ls + qs).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    return false;
  }
  for (int i = 0; i < k; ++i) lambda(support[i]) = ls(i);
  return true;
}

LcpResult Enumerate(const LinCompProblem& p, const LcpOptions& opts) {
  const int n = static_cast<int>(p.q.size());
  if (n > 16) throw std::invalid_argument("LCP enumeration limited to n <= 16");
  VectorXd lambda;
  VectorXd best = VectorXd::Zero(n);
  double best_res = LcpResidual(p, best);
  int tried = 0;
  std::vector<int> support;
  for (int k = 0; k <= n; ++k) {
    // Lexicographic k-subsets of {0..n-1}.
    support.resize(k);
    for (int i = 0; i < k; ++i) support[i] = i;
    while (true) {
      ++tried;
      if (SolveSupport(p, support, false, lambda)) {
        for (int i : support) {
          if (lambda(i) < 0.0 && lambda(i) > -opts.enumerate_tol) lambda(i) = 0.0;
        }
        const double r = LcpResidual(p, lambda);
        if (r <= opts.enumerate_tol) return Finish(p, lambda, opts.enumerate_tol, tried);
        if (r < best_res) {
          best_res = r;
          best = lambda;
        }
      }
      int i = k - 1;
      while (i >= 0 && support[i] == n - k + i) --i;
      if (i < 0) break;
      ++support[i];
      for (int j = i + 1; j < k; ++j) support[j] = support[j - 1] + 1;
    }
  }
  return Finish(p, best, opts.enumerate_tol, tried);
}

// Refines the complementary support implied by `lambda` with direct solves,
// moving one violating index at a time once the bulk swap stops helping.
VectorXd PolishSupport(const LinCompProblem& p, const VectorXd& start, int rounds,
                       double& best_res) {
  const int n = static_cast<int>(p.q.size());
  VectorXd best = start;
  best_res = LcpResidual(p, start);
  const VectorXd w0 = p.M * start + p.q;
  std::vector<char> in(n, 0);
  for (int i = 0; i < n; ++i) in[i] = start(i) > w0(i) ? 1 : 0;
  bool bulk = true;
  VectorXd lambda;
  for (int round = 0; round < rounds; ++round) {
    std::vector<int> support;
    for (int i = 0; i < n; ++i) {
      if (in[i]) support.push_back(i);
    }
    if (!SolveSupport(p, support, true, lambda)) {
      if (!bulk) break;
      bulk = false;
      continue;
    }
    const VectorXd w = p.M * lambda + p.q;
    VectorXd clipped = lambda.cwiseMax(0.0);
    const double r = LcpResidual(p, clipped);
    if (r < best_res) {
      best_res = r;
      best = clipped;
    } else if (bulk) {
      bulk = false;
    }
    int worst = -1;
    double worst_val = 0.0;
    std::vector<int> flips;
    for (int i = 0; i < n; ++i) {
      const double v = in[i] ? lambda(i) : w(i);
      if (v < -1e-14) {
        flips.push_back(i);
        if (v < worst_val) {
          worst_val = v;
          worst = i;
        }
      }
    }
    if (worst < 0) break;
    if (bulk) {
      for (int i : flips) in[i] = !in[i];
    } else {
      in[worst] = !in[worst];
    }
  }
  return best;
}

LcpResult Iterative(const LinCompProblem& p, const LcpOptions& opts, const VectorXd* warm) {
  const int n = static_cast<int>(p.q.size());
  VectorXd lambda = VectorXd::Zero(n);
  if (warm != nullptr && warm->size() == n && warm->allFinite()) {
    lambda = warm->cwiseMax(0.0);
  }
  if (n == 0) return Finish(p, lambda, opts.tol, 0);
  VectorXd w = p.M * lambda + p.q;
  int sweep = 0;
  double res = LcpResidual(p, lambda);
  for (; sweep < opts.max_sweeps && res > 0.1 * opts.tol; ++sweep) {
    for (int i = 0; i < n; ++i) {
      const double mii = p.M(i, i);
      if (mii <= 1e-14) {
        if (w(i) > 0.0 && lambda(i) > 0.0) {
          w -= p.M.col(i) * lambda(i);
          lambda(i) = 0.0;
        }
        continue;
      }
      const double next = std::max(0.0, lambda(i) - w(i) / mii);
      const double delta = next - lambda(i);
      if (delta != 0.0) {
        w += p.M.col(i) * delta;
        lambda(i) = next;
      }
    }
    if (sweep % 10 == 9) {
      w = p.M * lambda + p.q;
      res = LcpResidual(p, lambda);
    }
  }
  res = LcpResidual(p, lambda);
  if (res > 1e-12) {
    double polished_res = res;
    VectorXd polished = PolishSupport(p, lambda, opts.polish_rounds, polished_res);
    if (polished_res < res) lambda = polished;
  }
  return Finish(p, lambda, opts.tol, sweep);
}

}  // namespace

LcpResult SolveLcp(const LinCompProblem& p, LcpMethod method, const LcpOptions& opts,
                   const VectorXd* warm) {
  CheckProblem(p);
  switch (method) {
    case LcpMethod::kEnumerate:
      return Enumerate(p, opts);
    case LcpMethod::kIterative:
      return Iterative(p, opts, warm);
  }
  throw std::invalid_argument("unknown LCP method");
}

}  // namespace numopt
}  // namespace onpalm
