#pragma once

#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "onpalm/lcs/lcs.h"
#include "onpalm/numopt/miqp_projection.h"
#include "onpalm/numopt/qp_solver.h"

namespace onpalm {
namespace c3 {

struct ConsensusWeights {
  double x{0.1};
  double lambda{10.0};
  double u{0.1};
};

/// kActiveSet condenses the dynamics and solves the horizon QP with a dense
/// dual active-set method (exact constraint satisfaction); kAdmm solves the
/// sparse stacked QP with the operator-splitting solver and its warm starts.
/// kActiveSet falls back to kAdmm on a degenerate active set.
enum class QpBackend { kActiveSet, kAdmm };

/// Horizon, costs and ADMM schedule. State weights follow the state layout
/// [q (10), v (9)]; an empty q_f means Q_f = Q.
struct C3Params {
  int N{5};
  double dt{0.075};
  Eigen::VectorXd q_q;
  Eigen::VectorXd q_v;
  Eigen::VectorXd q_f;
  Eigen::VectorXd r;
  ConsensusWeights g{0.1, 10.0, 0.1};
  ConsensusWeights u_weights{0.1, 10.0, 3.0};
  double rho{4.0};
  int admm_iters{2};
  /// Workspace box on the first three state entries (ee position), enforced
  /// on knots 1..N.
  Eigen::Vector3d ee_min{0.4, -0.1, 0.35};
  Eigen::Vector3d ee_max{0.6, 0.1, 0.7};
  Eigen::VectorXd u_min;
  Eigen::VectorXd u_max;
  /// Entries of the workspace box; a model without an ee (toy systems) can
  /// clear this to disable it.
  bool has_workspace{true};
  QpBackend qp_backend{QpBackend::kActiveSet};
  numopt::QpSettings qp;
  numopt::ProjectionBudget projection;
  /// The first knot's copy keeps x₀ and projects only its forces and
  /// inputs, so consensus at k = 0 is reachable.
  bool pin_initial_state{true};
  /// With a cache, start from the previous solve's (shifted) copies and
  /// duals instead of the force-only first QP.
  bool consensus_warm_start{true};
  /// Divide the scaled duals by ρ whenever G is multiplied by ρ.
  bool rescale_duals{true};
  /// Projections run on this many threads (1 = inline).
  int projection_threads{1};

  Eigen::VectorXd StateWeights() const;
  Eigen::VectorXd TerminalWeights() const;

  static C3Params TrayRetrieval();
  static C3Params WallRotation();
};

/// Empty when valid; otherwise one message per problem.
std::vector<std::string> Validate(const C3Params& p, int num_states, int num_inputs);

enum class C3Status { kOk, kInfeasible };

struct C3Solution {
  C3Status status{C3Status::kOk};
  std::string error;
  double dt{0.0};
  std::vector<Eigen::VectorXd> x;       // N + 1 knots
  std::vector<Eigen::VectorXd> u;       // N
  std::vector<Eigen::VectorXd> lambda;  // N
  /// max_i min(λᵢ, sᵢ) of the returned iterate at each knot.
  std::vector<double> complementarity_residual;
  /// Consensus copies and scaled duals after the last projection, stacked
  /// per knot as [x, λ, u].
  std::vector<Eigen::VectorXd> copies;
  std::vector<Eigen::VectorXd> duals;
  std::vector<numopt::ModeAssignment> modes;
  std::vector<numopt::ProjectionFlag> projection_flags;
  int infeasible_knot_fallbacks{0};
  int qp_iterations{0};
  double objective{0.0};
  double solve_time{0.0};
  double qp_time{0.0};
  double projection_time{0.0};
  int projection_nodes{0};
  /// The returned trajectories come from a QP step (early termination).
  bool from_qp_step{true};

  int N() const { return static_cast<int>(u.size()); }
};

/// Cost of a plan under the horizon objective (without consensus terms).
double PlanCost(const C3Solution& sol, const Eigen::VectorXd& target, const C3Params& p);

/// Per-subprogram warm starts: one primal/dual pair per horizon QP of the
/// alternation and one mode hint per knot projection.
class WarmStartCache {
 public:
  void Clear() {
    qp_.clear();
    modes_.clear();
    copies_.clear();
    duals_.clear();
  }
  /// Moves every stored entry one knot earlier, repeating the last knot.
  void ShiftOneKnot(int num_states, int num_lambdas, int num_inputs);

  const numopt::QpWarmStart* Qp(const std::string& key, int n, int m) const;
  void StoreQp(const std::string& key, numopt::QpWarmStart warm);
  const numopt::ModeAssignment* Modes(const std::string& key, int pairs) const;
  void StoreModes(const std::string& key, numopt::ModeAssignment modes);

  /// Projected copies and duals of the last solve, one per knot.
  bool HasConsensus(int knots, int nz) const;
  const std::vector<Eigen::VectorXd>& copies() const { return copies_; }
  const std::vector<Eigen::VectorXd>& duals() const { return duals_; }
  void StoreConsensus(std::vector<Eigen::VectorXd> copies, std::vector<Eigen::VectorXd> duals);

  size_t size() const { return qp_.size() + modes_.size() + (copies_.empty() ? 0 : 1); }

 private:
  std::vector<Eigen::VectorXd> copies_;
  std::vector<Eigen::VectorXd> duals_;
  std::map<std::string, numopt::QpWarmStart> qp_;
  std::map<std::string, numopt::ModeAssignment> modes_;
};

/// Consensus ADMM over the horizon: admm_iters rounds of {QP step,
/// per-knot projection of iterate + dual, dual update, G ← ρG}, then one
/// more QP step whose iterate is returned. Before the first projection no
/// copies exist, so the first QP keeps only the force part of the consensus
/// term, toward zero.
C3Solution Solve(const lcs::Lcs& model, const Eigen::VectorXd& x0, const Eigen::VectorXd& target,
                 const C3Params& params, WarmStartCache* cache = nullptr);

/// w ← w + z − δ for every knot and G ← ρG.
void DualAndScaleUpdate(const std::vector<Eigen::VectorXd>& copies,
                        const std::vector<Eigen::VectorXd>& iterate,
                        std::vector<Eigen::VectorXd>& duals, Eigen::VectorXd& g_diag,
                        double rho);

/// Filtered solve time dt̄ ← a·dt̄ + (1 − a)·t.
class LatencyEstimator {
 public:
  explicit LatencyEstimator(double initial = 0.025, double coefficient = 0.9);
  void Update(double solve_time);
  double value() const { return value_; }
  double coefficient() const { return coefficient_; }

 private:
  double value_;
  double coefficient_;
};

/// x0 for the next solve: ee position (entries 0..2) and velocity (three
/// entries from `ee_velocity_index`) from the previous plan at time dt̄,
/// linearly interpolated and clamped to the horizon; all other entries from
/// the measurement.
Eigen::VectorXd PredictInitialState(const C3Solution& plan, const Eigen::VectorXd& measured,
                                    double latency, int ee_velocity_index = 10);

/// One JSON object per line: solve time, residuals, modes.
std::string DiagnosticsJsonLine(const C3Solution& sol, double t);

}  // namespace c3
}  // namespace onpalm
