#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "onpalm/config/config.h"
#include "onpalm/harness/harness.h"

namespace onpalm {
namespace cli {

enum ExitCode : int {
  kExitOk = 0,
  /// An episode faulted, or a verify suite failed.
  kExitFailure = 1,
  /// Bad flags, manifest or config file.
  kExitUsage = 2,
};

struct RunManifest {
  /// Empty selects the shipped defaults of `task`.
  std::string config_path;
  /// Unset: the config file's kind, or tray without a file.
  std::optional<config::TaskKind> task;
  std::vector<uint64_t> seeds;
  harness::BridgeMode mode{harness::BridgeMode::kDirectForce};
  harness::LatencyModel latency;
  std::string out_dir{"onpalm_out"};
  /// Run every seed twice in OSC mode, with and without the force term.
  bool ablate_force_objective{false};
  /// At most two seeds.
  bool quick{false};
  /// Worker threads; 0 uses the hardware concurrency.
  int jobs{0};
};

/// Empty when usable; otherwise one message per problem.
std::vector<std::string> Validate(const RunManifest& m);

/// "0-9" (inclusive range), "1,4,7" (list) or "10" (count: seeds 0..9).
/// Throws std::invalid_argument.
std::vector<uint64_t> ParseSeeds(const std::string& text);
/// "fixed:<ms>" or "wallclock". Throws std::invalid_argument.
harness::LatencyModel ParseLatency(const std::string& text);
harness::BridgeMode ParseMode(const std::string& text);
config::TaskKind ParseTask(const std::string& text);

/// Config of the manifest: the file when given, otherwise the shipped
/// defaults of the task. Throws config::ConfigError, also when the file's
/// task kind contradicts an explicit task.
config::ExperimentConfig ResolveConfig(const RunManifest& m);

/// One episode of `cfg` under the manifest's bridge and latency options.
harness::EpisodeLog RunOne(const config::ExperimentConfig& cfg, const RunManifest& m,
                           uint64_t seed, bool force_objective = true);

struct BatchSummary {
  std::string label;
  int episodes{0};
  int successes{0};
  int faults{0};
  /// Per target: reach times of the episodes that got there.
  std::vector<std::vector<double>> reach_times;
  double mean_hz{0.0};
  double median_hz{0.0};
};

BatchSummary Summarize(const std::string& label, const std::vector<harness::EpisodeLog>& logs);

/// summary.json body for one or more batches.
std::string SummaryJson(const RunManifest& m, const config::ExperimentConfig& cfg,
                        const std::vector<BatchSummary>& batches,
                        const std::vector<std::vector<harness::EpisodeLog>>& logs);

/// Runs the batch(es), writes summary.json plus one CSV and one plot-data
/// file per episode under out_dir (one subdirectory per ablation arm), and
/// returns the exit code. Progress goes to `log`.
int CmdRun(const RunManifest& m, std::ostream& log);

/// Runs every oracle suite and prints one line each.
int CmdVerify(bool quick, std::ostream& out);

}  // namespace cli
}  // namespace onpalm
