#pragma once

#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace onpalm {
namespace numopt {

enum class PairMode { kForceZero, kSlackZero, kFree };
using ModeAssignment = std::vector<PairMode>;

/// Weighted nearest point onto a complementarity set:
///
///   min (δ−ω)ᵀ U (δ−ω)
///   s.t. 0 ≤ δ[force_index[i]] ⊥ (W δ + c)_i ≥ 0   for every pair i
///        lower ≤ δ ≤ upper
///
/// U is diagonal and positive. Empty bound vectors mean unbounded; infinite
/// entries are ignored.
struct ComplementarityProjection {
  Eigen::VectorXd weights;
  Eigen::VectorXd target;
  Eigen::MatrixXd slack_matrix;
  Eigen::VectorXd slack_offset;
  std::vector<int> force_index;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  int num_vars() const { return static_cast<int>(target.size()); }
  int num_pairs() const { return static_cast<int>(force_index.size()); }
};

struct ProjectionBudget {
  int max_nodes{2000};
  /// Wall-clock limit in seconds; ≤ 0 disables it (deterministic runs).
  double time_limit{0.005};
  /// A free pair counts as complementary when min(λᵢ, sᵢ) ≤ tol.
  double complementarity_tol{1e-9};
};

enum class ProjectionFlag { kExact, kIncumbent };
enum class ProjectionStatus { kOk, kInfeasibleKnot };

std::string_view ToString(ProjectionFlag flag);
std::string_view ToString(ProjectionStatus status);

struct ProjectionResult {
  Eigen::VectorXd delta;
  double objective{0.0};
  ProjectionStatus status{ProjectionStatus::kInfeasibleKnot};
  ProjectionFlag flag{ProjectionFlag::kIncumbent};
  /// Mode of each pair in the returned point (never kFree).
  ModeAssignment modes;
  int nodes{0};
  /// Best lower bound still open when the search stopped.
  double lower_bound{0.0};
  /// Incumbent objective after each processed node (+inf before the first).
  std::vector<double> incumbent_history;
};

/// Best-first branch and bound over pair modes. Each node solves the convex
/// relaxation with the orthogonality condition dropped; branching takes the
/// free pair with the largest min(λᵢ, sᵢ), lowest index on ties. `hint`
/// seeds an incumbent (e.g. the modes of the previous solve).
ProjectionResult ProjectComplementarity(const ComplementarityProjection& prob,
                                        const ProjectionBudget& budget = {},
                                        const ModeAssignment* hint = nullptr);

/// Solves the convex QP obtained by fixing the given modes; kFree pairs keep
/// only λ ≥ 0 and s ≥ 0. Returns false when infeasible.
bool SolveModeQp(const ComplementarityProjection& prob, const ModeAssignment& modes,
                 Eigen::VectorXd& delta, double& objective);

/// Slack values W δ + c.
Eigen::VectorXd ProjectionSlack(const ComplementarityProjection& prob,
                                const Eigen::VectorXd& delta);

}  // namespace numopt
}  // namespace onpalm
