#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "onpalm/c3/c3.h"
#include "onpalm/c3/tracking.h"
#include "onpalm/osc/osc.h"
#include "onpalm/scenario/scenario_config.h"

namespace onpalm {
namespace harness {

struct Target {
  Eigen::Vector3d tray;
  Eigen::Vector3d ee;
  /// Time the tray must stay inside the success ball before the next target.
  double idle_time{0.0};
};

struct TaskSpec {
  std::vector<Target> targets;
  double success_radius{0.05};
  double time_limit{15.0};

  static TaskSpec TrayRetrieval();
};

std::vector<std::string> Validate(const TaskSpec& spec);

/// Euclidean projection onto the ee workspace box.
Eigen::Vector3d ClampToWorkspace(const Eigen::Vector3d& p, const c3::C3Params& params);

struct SequencerState {
  int active{0};
  double hold{0.0};
  bool complete{false};
};

struct SequencerUpdate {
  int active{0};
  bool advanced{false};
};

/// Accrues `dt` of hold time while the tray is within the success radius of
/// the active target and resets it on exit. Advances once the hold reaches
/// the target's idle time; past the last target `complete` is set.
SequencerUpdate TargetSequencerStep(const TaskSpec& spec, const Eigen::Vector3d& tray_pos,
                                    double dt, SequencerState& state);

enum class BridgeMode { kDirectForce, kOscArm };
enum class Outcome { kSuccess, kTimeout, kFault };

std::string_view ToString(BridgeMode mode);
std::string_view ToString(Outcome outcome);

/// Fixed delay is deterministic; wall-clock mode activates each plan after
/// its measured solve time.
struct LatencyModel {
  bool wallclock{false};
  double fixed_delay{0.025};
};

struct EpisodeOptions {
  BridgeMode mode{BridgeMode::kDirectForce};
  LatencyModel latency;
  uint64_t seed{0};
  /// Uniform half-width of the initial tray x/y perturbation.
  double perturbation{0.01};
  double fine_dt{0.001};
  double measurement_rate{10.0};
  /// DIRECT_FORCE: Cartesian PD on the planned ee trajectory added to u_lcs,
  /// as acceleration gains (scaled by the ee mass).
  double direct_kp{400.0};
  double direct_kd{40.0};
  osc::OscParams osc;
  /// Inputs fed to the bridge: the projected copies' by default.
  c3::PlanInputs plan_inputs{c3::PlanInputs::kProjected};
  /// Stop as soon as the task completes instead of running to the limit.
  bool stop_on_success{true};
  double log_period{0.01};
  /// Initial ee position (also the arm's starting tool position).
  Eigen::Vector3d ee_start{0.55, 0.0, 0.45};
};

struct StateSample {
  double t{0.0};
  Eigen::VectorXd x;
  Eigen::Vector3d ee_force{Eigen::Vector3d::Zero()};
  Eigen::VectorXd lambda;
  int target{0};
};

struct PlanRecord {
  double t_start{0.0};
  double t_active{0.0};
  double solve_time{0.0};
  /// Time of the tray sample in the plan's initial state.
  double measurement_time{0.0};
  double objective{0.0};
  int fallbacks{0};
  Eigen::Vector3d u0{Eigen::Vector3d::Zero()};
  std::string modes;
};

struct EpisodeLog {
  std::vector<StateSample> samples;
  std::vector<PlanRecord> plans;
  Outcome outcome{Outcome::kTimeout};
  std::string fault;
  /// Time each target was completed (NaN-free; only reached targets).
  std::vector<double> reach_times;
  double final_time{0.0};
  /// Worst ground-truth LCP residual over the episode.
  double worst_lcp_residual{0.0};
  uint64_t seed{0};
  int num_contacts{0};
};

/// Closed-loop episode: 1 ms ground truth, C3 replanning whose plans become
/// active after the emulated delay, 10 Hz zero-order-hold tray measurements,
/// and either direct ee forces or the arm under OSC.
EpisodeLog RunEpisode(const scenario::ScenarioConfig& cfg, const TaskSpec& spec,
                      const c3::C3Params& params, const EpisodeOptions& opts);

/// gain·θ·â for the rotation taking `current` to `target`, θ ∈ [0, π].
Eigen::Vector3d WallOrientationTarget(const Eigen::Quaterniond& current,
                                      const Eigen::Quaterniond& target, double gain);

struct WallTaskOptions {
  EpisodeOptions episode;
  double initial_yaw{0.7854};
  double gain{2.0};
  /// Tray target offset toward the wall (world +y).
  double wall_bias{0.05};
  double time_limit{20.0};
  double success_yaw{10.0 * 3.14159265358979323846 / 180.0};
};

/// Initial state: tray on the palm, yawed by `initial_yaw`, 2 cm toward the
/// wall.
Eigen::VectorXd WallInitialState(const scenario::ScenarioConfig& cfg, double initial_yaw);

EpisodeLog RunWallTask(const scenario::ScenarioConfig& cfg, const c3::C3Params& params,
                       const WallTaskOptions& opts);

/// |yaw| of the tray relative to identity, in radians.
double YawError(const Eigen::VectorXd& x);

/// Time series: one row per logged sample.
std::string EpisodeCsv(const EpisodeLog& log);
/// Summary of one episode (outcome, reach times, solve-rate statistics).
std::string EpisodeSummaryJson(const EpisodeLog& log);
/// Positions plus per-contact activity over time.
std::string PlotDataJson(const EpisodeLog& log);

/// Median of 1/solve_time over the plans.
double MedianReplanHz(const EpisodeLog& log);

}  // namespace harness
}  // namespace onpalm
