#include "onpalm/harness/harness.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <optional>
#include <random>
#include <sstream>

#include <json.hpp>

#include "onpalm/c3/tracking.h"
#include "onpalm/scenario/dynamics.h"
#include "onpalm/scenario/state.h"

namespace onpalm {
namespace harness {

using Eigen::Vector3d;
using Eigen::VectorXd;
namespace sc = scenario;

TaskSpec TaskSpec::TrayRetrieval() {
  TaskSpec s;
  s.targets = {{{0.45, 0.0, 0.485}, {0.45, 0.0, 0.47}, 0.5},
               {{0.45, 0.0, 0.60}, {0.45, 0.0, 0.585}, 3.0},
               {{0.7, 0.0, 0.485}, {0.6, 0.0, 0.47}, 0.0}};
  s.success_radius = 0.05;
  s.time_limit = 15.0;
  return s;
}

std::vector<std::string> Validate(const TaskSpec& spec) {
  std::vector<std::string> out;
  if (spec.targets.empty()) out.push_back("task needs at least one target");
  if (!(spec.success_radius > 0.0)) out.push_back("success_radius must be positive");
  if (!(spec.time_limit > 0.0)) out.push_back("time_limit must be positive");
  for (size_t i = 0; i < spec.targets.size(); ++i) {
    if (spec.targets[i].idle_time < 0.0) {
      out.push_back("target " + std::to_string(i) + " has negative idle time");
    }
  }
  return out;
}

Vector3d ClampToWorkspace(const Vector3d& p, const c3::C3Params& params) {
  return p.cwiseMax(params.ee_min).cwiseMin(params.ee_max);
}

SequencerUpdate TargetSequencerStep(const TaskSpec& spec, const Vector3d& tray_pos, double dt,
                                    SequencerState& state) {
  SequencerUpdate up;
  if (state.complete) {
    up.active = state.active;
    return up;
  }
  const Target& target = spec.targets[state.active];
  if ((tray_pos - target.tray).norm() <= spec.success_radius) {
    state.hold += dt;
  } else {
    state.hold = 0.0;
  }
  // Half a tick of slack so a hold of exactly the idle time counts.
  if (state.hold + 0.5 * dt >= target.idle_time && state.hold > 0.0) {
    up.advanced = true;
    state.hold = 0.0;
    if (state.active + 1 < static_cast<int>(spec.targets.size())) {
      ++state.active;
    } else {
      state.complete = true;
    }
  }
  up.active = state.active;
  return up;
}

std::string_view ToString(BridgeMode mode) {
  return mode == BridgeMode::kDirectForce ? "direct" : "osc";
}

std::string_view ToString(Outcome outcome) {
  switch (outcome) {
    case Outcome::kSuccess:
      return "SUCCESS";
    case Outcome::kTimeout:
      return "TIMEOUT";
    case Outcome::kFault:
      return "FAULT";
  }
  return "UNKNOWN";
}

Vector3d WallOrientationTarget(const Eigen::Quaterniond& current, const Eigen::Quaterniond& target,
                               double gain) {
  Eigen::Quaterniond err = target.normalized() * current.normalized().conjugate();
  if (err.w() < 0.0) err.coeffs() = -err.coeffs();
  const double s = err.vec().norm();
  if (s < 1e-12) return Vector3d::Zero();
  const double theta = 2.0 * std::atan2(s, err.w());
  return gain * theta * err.vec() / s;
}

double YawError(const VectorXd& x) { return std::abs(sc::TrayYaw(x)); }

namespace {

constexpr double kTimeEps = 1e-9;

struct ActivePlan {
  c3::C3Solution sol;
  c3::TrackingTargets targets;
  double origin{0.0};
  double activate{0.0};
};

// Everything that differs between the retrieval and wall tasks.
struct TaskHooks {
  std::function<VectorXd(double t, const VectorXd& measured, int target)> goal;
  // Returns the active target index and sets `done` once the task succeeds.
  std::function<int(double t, double dt, const VectorXd& x, bool& done, bool& advanced)> progress;
  double time_limit{15.0};
};

std::string ModePattern(const c3::C3Solution& sol) {
  std::string s;
  if (sol.modes.empty()) return s;
  for (numopt::PairMode m : sol.modes.front()) s += m == numopt::PairMode::kForceZero ? '0' : '1';
  return s;
}

struct ArmState {
  osc::ManipulatorModel model{osc::BuiltinTestArm()};
  VectorXd q;
  VectorXd qd;
};

void SyncEe(const ArmState& arm, VectorXd& x) {
  const osc::Kinematics k = arm.model.ToolKinematics(arm.q, arm.qd);
  x.segment<3>(sc::kEePos) = k.position;
  x.segment<3>(sc::kEeVel) = k.jacobian.topRows<3>() * arm.qd;
}

EpisodeLog ClosedLoop(const sc::ScenarioConfig& cfg, c3::C3Params params, VectorXd x,
                      const EpisodeOptions& opts, const TaskHooks& hooks) {
  EpisodeLog log;
  log.seed = opts.seed;
  log.num_contacts = cfg.num_contacts();
  if (!opts.latency.wallclock) params.projection.time_limit = 0.0;

  std::optional<ArmState> arm;
  if (opts.mode == BridgeMode::kOscArm) {
    arm.emplace();
    arm->model.AddToolMass(cfg.ee.mass);
    arm->q = osc::BuiltinArmInverseKinematics(x.segment<3>(sc::kEePos));
    arm->qd = VectorXd::Zero(arm->model.num_joints());
    SyncEe(*arm, x);
  }
  const osc::OscParams osc_params = opts.osc;

  const double dt = opts.fine_dt;
  const int steps = static_cast<int>(std::ceil(hooks.time_limit / dt - kTimeEps));
  const double sample_period = 1.0 / opts.measurement_rate;
  const int log_every = std::max(1, static_cast<int>(std::lround(opts.log_period / dt)));
  VectorXd tray_sample = x;
  double tray_sample_time = 0.0;
  double next_sample = 0.0;
  int samples_taken = 0;
  std::optional<ActivePlan> active, pending;
  double next_solve = 0.0;
  c3::LatencyEstimator latency(opts.latency.fixed_delay);
  c3::WarmStartCache cache;
  double cache_origin = 0.0;
  VectorXd lambda_warm;
  const Vector3d hold_ee = x.segment<3>(sc::kEePos);
  int target = 0;
  bool done = false;

  for (int step = 0; step <= steps; ++step) {
    const double t = step * dt;
    if (t + kTimeEps >= next_sample) {
      tray_sample = x;
      tray_sample_time = t;
      next_sample = ++samples_taken * sample_period;
    }
    if (pending && t + kTimeEps >= pending->activate) {
      active = std::move(pending);
      pending.reset();
      next_solve = t;
    }
    if (!pending && t + kTimeEps >= next_solve) {
      // The ee comes from proprioception; the tray from the last sample.
      VectorXd measured = tray_sample;
      measured.segment<3>(sc::kEePos) = x.segment<3>(sc::kEePos);
      measured.segment<3>(sc::kEeVel) = x.segment<3>(sc::kEeVel);
      const double look_ahead = opts.latency.wallclock ? latency.value() : opts.latency.fixed_delay;
      const double origin = t + look_ahead;
      VectorXd x0 = measured;
      Vector3d u_lin = Vector3d::Zero();
      if (active) {
        x0 = c3::PredictInitialState(active->sol, measured, origin - active->origin);
        u_lin = active->targets.At(origin - active->origin).force;
      }
      while (origin - cache_origin >= 0.5 * params.dt) {
        cache.ShiftOneKnot(sc::kNumStates, cfg.num_lambdas(), sc::kNumInputs);
        cache_origin += params.dt;
      }
      if (origin - cache_origin < -0.5 * params.dt) cache_origin = origin;
      const VectorXd goal = hooks.goal(t, x0, target);
      const lcs::Lcs model = sc::LinearizeDynamics(cfg, x0, u_lin, params.dt);
      c3::C3Solution sol = c3::Solve(model, x0, goal, params, &cache);
      PlanRecord rec;
      rec.t_start = t;
      rec.solve_time = sol.solve_time;
      rec.measurement_time = tray_sample_time;
      rec.objective = sol.objective;
      rec.fallbacks = sol.infeasible_knot_fallbacks;
      if (sol.status == c3::C3Status::kOk) {
        const double delay = opts.latency.wallclock ? sol.solve_time : opts.latency.fixed_delay;
        if (opts.latency.wallclock) latency.Update(sol.solve_time);
        rec.t_active = t + delay;
        rec.u0 = sol.u.front();
        rec.modes = ModePattern(sol);
        ActivePlan next;
        next.targets = c3::TrackingTargets(sol, sc::kEeVel, opts.plan_inputs);
        next.sol = std::move(sol);
        next.origin = origin;
        next.activate = t + delay;
        pending = std::move(next);
      } else {
        rec.t_active = -1.0;
        next_solve = t + dt;
      }
      log.plans.push_back(std::move(rec));
    }

    c3::EeTarget ref;
    const bool tracking = active.has_value();
    if (tracking) {
      ref = active->targets.At(t - active->origin);
    } else {
      ref.position = hold_ee;
      ref.velocity.setZero();
      ref.acceleration.setZero();
      ref.force.setZero();
    }

    sc::GroundTruthResult gt;
    Vector3d applied = Vector3d::Zero();
    try {
      const VectorXd* warm = lambda_warm.size() ? &lambda_warm : nullptr;
      if (!arm) {
        const Vector3d e = ref.position - x.segment<3>(sc::kEePos);
        const Vector3d ed = ref.velocity - x.segment<3>(sc::kEeVel);
        applied = ref.force + cfg.ee.mass * (opts.direct_kp * e + opts.direct_kd * ed);
        gt = sc::GroundTruthStep(cfg, x, applied, dt, {}, warm);
      } else {
        const Vector3d p = ref.position, v = ref.velocity, a = ref.acceleration;
        const Vector3d f = ref.force;
        const osc::OscProblem prob = osc::BuiltinArmProblem(
            osc_params, [p, v, a](double) { return osc::Reference{p, v, a}; },
            [f](double) { return f; });
        const osc::OscSolution s = osc::OscSolve(arm->model, arm->q, arm->qd, prob, t);
        if (!s.ok) throw sc::SimulationFault("OSC failed: " + s.error);
        applied = s.force;
        sc::RobotBody body;
        body.mass = arm->model.MassMatrix(arm->q);
        body.velocity = arm->qd;
        body.force = s.torque - arm->model.Bias(arm->q, arm->qd);
        body.ee_jacobian = arm->model.ToolKinematics(arm->q, arm->qd).jacobian.topRows<3>();
        gt = sc::GroundTruthStepCoupled(cfg, x, body, dt, {}, warm);
        arm->qd = gt.robot_velocity;
        arm->q += dt * arm->qd;
        SyncEe(*arm, gt.x_next);
      }
    } catch (const sc::SimulationFault& fault) {
      log.outcome = Outcome::kFault;
      log.fault = fault.what();
      log.final_time = t;
      return log;
    }
    lambda_warm = gt.lambda;
    log.worst_lcp_residual = std::max(log.worst_lcp_residual, gt.lcp_residual);
    if (step % log_every == 0) {
      StateSample s;
      s.t = t;
      s.x = x;
      s.ee_force = applied;
      s.lambda = gt.lambda;
      s.target = target;
      log.samples.push_back(std::move(s));
    }
    x = gt.x_next;
    bool advanced = false;
    target = hooks.progress(t + dt, dt, x, done, advanced);
    if (advanced) log.reach_times.push_back(t + dt);
    log.final_time = t + dt;
    if (done) {
      log.outcome = Outcome::kSuccess;
      if (opts.stop_on_success) break;
    }
  }
  if (!done) log.outcome = Outcome::kTimeout;
  return log;
}

VectorXd GoalState(const Vector3d& ee, const Vector3d& tray) {
  return sc::MakeState(ee, tray);
}

std::string Num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

}  // namespace

EpisodeLog RunEpisode(const sc::ScenarioConfig& cfg, const TaskSpec& spec,
                      const c3::C3Params& params, const EpisodeOptions& opts) {
  if (const auto errs = Validate(spec); !errs.empty()) throw std::invalid_argument(errs.front());
  std::mt19937_64 rng(opts.seed);
  std::uniform_real_distribution<double> u(-opts.perturbation, opts.perturbation);
  VectorXd x = sc::RestingTrayState(cfg);
  x(sc::kTrayPos) += u(rng);
  x(sc::kTrayPos + 1) += u(rng);
  x.segment<3>(sc::kEePos) = opts.ee_start;

  auto seq = std::make_shared<SequencerState>();
  TaskHooks hooks;
  hooks.time_limit = spec.time_limit;
  hooks.goal = [&spec, &params](double, const VectorXd&, int target) {
    const Target& tg = spec.targets[target];
    return GoalState(ClampToWorkspace(tg.ee, params), tg.tray);
  };
  hooks.progress = [&spec, seq](double, double dt, const VectorXd& x, bool& done, bool& advanced) {
    const SequencerUpdate up = TargetSequencerStep(spec, x.segment<3>(sc::kTrayPos), dt, *seq);
    advanced = up.advanced;
    done = seq->complete;
    return up.active;
  };
  return ClosedLoop(cfg, params, x, opts, hooks);
}

VectorXd WallInitialState(const sc::ScenarioConfig& cfg, double initial_yaw) {
  (void)cfg;
  return sc::MakeState(Vector3d(0.55, 0.0, 0.469), Vector3d(0.55, 0.02, 0.485),
                       sc::YawQuaternion(initial_yaw));
}

EpisodeLog RunWallTask(const sc::ScenarioConfig& cfg, const c3::C3Params& params,
                       const WallTaskOptions& opts) {
  std::mt19937_64 rng(opts.episode.seed);
  std::uniform_real_distribution<double> u(-opts.episode.perturbation, opts.episode.perturbation);
  VectorXd x = WallInitialState(cfg, opts.initial_yaw);
  x(sc::kTrayPos) += u(rng);
  x(sc::kTrayPos + 1) += u(rng);
  EpisodeOptions eo = opts.episode;
  eo.ee_start = x.segment<3>(sc::kEePos);

  TaskHooks hooks;
  hooks.time_limit = opts.time_limit;
  const Vector3d ee_goal(0.55, 0.0, 0.469);
  const Vector3d tray_goal(0.55, opts.wall_bias, 0.485);
  const double gain = opts.gain;
  hooks.goal = [ee_goal, tray_goal, gain](double, const VectorXd& x0, int) {
    VectorXd g = GoalState(ee_goal, tray_goal);
    g.segment<3>(sc::kTrayOmega) =
        WallOrientationTarget(sc::TrayQuaternion(x0), Eigen::Quaterniond::Identity(), gain);
    return g;
  };
  const double success = opts.success_yaw;
  hooks.progress = [success](double, double, const VectorXd& x, bool& done, bool& advanced) {
    advanced = false;
    if (!done && YawError(x) < success) {
      done = true;
      advanced = true;
    }
    return 0;
  };
  return ClosedLoop(cfg, params, x, eo, hooks);
}

std::string EpisodeCsv(const EpisodeLog& log) {
  static const char* kStateNames[] = {
      "ee_x", "ee_y", "ee_z", "tray_qw", "tray_qx", "tray_qy", "tray_qz", "tray_x", "tray_y",
      "tray_z", "ee_vx", "ee_vy", "ee_vz", "tray_wx", "tray_wy", "tray_wz", "tray_vx", "tray_vy",
      "tray_vz"};
  std::ostringstream os;
  os << "t,target";
  for (const char* n : kStateNames) os << ',' << n;
  os << ",f_x,f_y,f_z";
  for (int c = 0; c < log.num_contacts; ++c) os << ",contact" << c << "_force";
  os << ",yaw\n";
  for (const StateSample& s : log.samples) {
    os << Num(s.t) << ',' << s.target;
    for (int i = 0; i < s.x.size(); ++i) os << ',' << Num(s.x(i));
    for (int i = 0; i < 3; ++i) os << ',' << Num(s.ee_force(i));
    for (int c = 0; c < log.num_contacts; ++c) {
      const double f = c * 4 + 4 <= s.lambda.size() ? s.lambda.segment<4>(4 * c).sum() : 0.0;
      os << ',' << Num(f);
    }
    os << ',' << Num(sc::TrayYaw(s.x)) << '\n';
  }
  return os.str();
}

double MedianReplanHz(const EpisodeLog& log) {
  std::vector<double> hz;
  for (const PlanRecord& p : log.plans) {
    if (p.solve_time > 0.0) hz.push_back(1.0 / p.solve_time);
  }
  if (hz.empty()) return 0.0;
  std::sort(hz.begin(), hz.end());
  const size_t n = hz.size();
  return n % 2 ? hz[n / 2] : 0.5 * (hz[n / 2 - 1] + hz[n / 2]);
}

std::string EpisodeSummaryJson(const EpisodeLog& log) {
  nlohmann::json j;
  j["seed"] = log.seed;
  j["outcome"] = std::string(ToString(log.outcome));
  if (!log.fault.empty()) j["fault"] = log.fault;
  j["reach_times"] = log.reach_times;
  j["final_time"] = log.final_time;
  j["num_plans"] = log.plans.size();
  double total = 0.0;
  int fallbacks = 0;
  for (const PlanRecord& p : log.plans) {
    total += p.solve_time;
    fallbacks += p.fallbacks;
  }
  j["mean_replan_hz"] = log.plans.empty() || total <= 0.0 ? 0.0 : log.plans.size() / total;
  j["median_replan_hz"] = MedianReplanHz(log);
  j["projection_fallbacks"] = fallbacks;
  j["worst_lcp_residual"] = log.worst_lcp_residual;
  if (!log.samples.empty()) j["final_yaw_deg"] = sc::TrayYaw(log.samples.back().x) * 180.0 / M_PI;
  return j.dump(2);
}

std::string PlotDataJson(const EpisodeLog& log) {
  nlohmann::json j;
  std::vector<double> t, yaw;
  std::vector<std::vector<double>> ee, tray;
  std::vector<std::string> modes;
  for (const StateSample& s : log.samples) {
    t.push_back(s.t);
    ee.push_back({s.x(0), s.x(1), s.x(2)});
    tray.push_back({s.x(sc::kTrayPos), s.x(sc::kTrayPos + 1), s.x(sc::kTrayPos + 2)});
    yaw.push_back(sc::TrayYaw(s.x));
    std::string m;
    for (int c = 0; c < log.num_contacts && 4 * c + 4 <= s.lambda.size(); ++c) {
      m += s.lambda.segment<4>(4 * c).sum() > 1e-6 ? '1' : '0';
    }
    modes.push_back(m);
  }
  j["t"] = t;
  j["ee_position"] = ee;
  j["tray_position"] = tray;
  j["tray_yaw"] = yaw;
  j["contact_active"] = modes;
  std::vector<double> plan_t;
  std::vector<std::string> plan_modes;
  for (const PlanRecord& p : log.plans) {
    plan_t.push_back(p.t_start);
    plan_modes.push_back(p.modes);
  }
  j["plan_start"] = plan_t;
  j["plan_modes"] = plan_modes;
  return j.dump();
}

}  // namespace harness
}  // namespace onpalm
