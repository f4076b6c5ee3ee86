#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "onpalm/c3/c3.h"
#include "onpalm/harness/harness.h"
#include "onpalm/osc/osc.h"
#include "onpalm/scenario/scenario_config.h"

namespace onpalm {
namespace config {

enum class TaskKind { kTray, kWall, kCustom };

std::string_view ToString(TaskKind kind);

/// Everything one run needs: a YAML file with the sections physical,
/// contacts, c3, osc and task.
struct ExperimentConfig {
  TaskKind task{TaskKind::kTray};
  scenario::ScenarioConfig scenario;
  c3::C3Params c3;
  osc::OscParams osc;
  /// Tray and custom tasks: targets, radius, time limit.
  harness::TaskSpec targets;
  /// Wall task settings (the episode options inside are unused; see below).
  harness::WallTaskOptions wall;
  /// Initial-state randomization, measurement rate and ground-truth step.
  harness::EpisodeOptions episode;

  static ExperimentConfig TrayRetrieval();
  static ExperimentConfig WallRotation();
};

/// Parse or validation failure. `line` is 1-based; 0 when unknown.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string source, int line, std::string field, const std::string& message);

  const std::string& source() const { return source_; }
  int line() const { return line_; }
  const std::string& field() const { return field_; }

 private:
  std::string source_;
  int line_;
  std::string field_;
};

/// `source` names the text in error messages.
ExperimentConfig ParseConfig(const std::string& text, const std::string& source = "<string>");
ExperimentConfig LoadConfig(const std::string& path);

std::string EmitConfig(const ExperimentConfig& cfg);

/// One "<field>: <a> != <b>" entry per differing scalar; empty when the
/// configs agree field by field.
std::vector<std::string> Diff(const ExperimentConfig& a, const ExperimentConfig& b);

}  // namespace config
}  // namespace onpalm
