#include "onpalm/cli/cli.h"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <ostream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "onpalm/verify/verify.h"

namespace onpalm {
namespace cli {

namespace fs = std::filesystem;
using config::ExperimentConfig;
using config::TaskKind;
using harness::EpisodeLog;

namespace {

uint64_t ParseUint(const std::string& s, const std::string& what) {
  uint64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw std::invalid_argument("bad " + what + " '" + s + "'");
  }
  return v;
}

void WriteFile(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

double Median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

std::vector<uint64_t> ParseSeeds(const std::string& text) {
  std::vector<uint64_t> out;
  if (text.find(',') != std::string::npos) {
    size_t start = 0;
    while (start <= text.size()) {
      const size_t end = std::min(text.find(',', start), text.size());
      const std::string item = text.substr(start, end - start);
      if (!item.empty()) out.push_back(ParseUint(item, "seed"));
      start = end + 1;
    }
  } else if (const size_t dash = text.find('-'); dash != std::string::npos) {
    const uint64_t a = ParseUint(text.substr(0, dash), "seed range");
    const uint64_t b = ParseUint(text.substr(dash + 1), "seed range");
    if (b < a) throw std::invalid_argument("empty seed range '" + text + "'");
    if (b - a >= 100000) throw std::invalid_argument("seed range too long");
    for (uint64_t s = a; s <= b; ++s) out.push_back(s);
  } else {
    const uint64_t n = ParseUint(text, "seed count");
    if (n > 100000) throw std::invalid_argument("seed count too large");
    for (uint64_t s = 0; s < n; ++s) out.push_back(s);
  }
  if (out.empty()) throw std::invalid_argument("no seeds in '" + text + "'");
  return out;
}

harness::LatencyModel ParseLatency(const std::string& text) {
  harness::LatencyModel m;
  if (text == "wallclock") {
    m.wallclock = true;
    return m;
  }
  if (text.rfind("fixed:", 0) != 0) {
    throw std::invalid_argument("latency must be fixed:<ms> or wallclock, got '" + text + "'");
  }
  const std::string ms = text.substr(6);
  double v = 0.0;
  const auto res = std::from_chars(ms.data(), ms.data() + ms.size(), v);
  if (ms.empty() || res.ec != std::errc() || res.ptr != ms.data() + ms.size() || v < 0.0) {
    throw std::invalid_argument("bad latency '" + text + "'");
  }
  m.fixed_delay = v * 1e-3;
  return m;
}

harness::BridgeMode ParseMode(const std::string& text) {
  if (text == "direct") return harness::BridgeMode::kDirectForce;
  if (text == "osc") return harness::BridgeMode::kOscArm;
  throw std::invalid_argument("mode must be direct or osc, got '" + text + "'");
}

TaskKind ParseTask(const std::string& text) {
  if (text == "tray") return TaskKind::kTray;
  if (text == "wall") return TaskKind::kWall;
  if (text == "custom") return TaskKind::kCustom;
  throw std::invalid_argument("task must be tray, wall or custom, got '" + text + "'");
}

std::vector<std::string> Validate(const RunManifest& m) {
  std::vector<std::string> out;
  if (m.seeds.empty()) out.push_back("no seeds");
  if (!m.config_path.empty() && !fs::exists(m.config_path)) {
    out.push_back("config file " + m.config_path + " does not exist");
  }
  if (m.config_path.empty() && m.task == TaskKind::kCustom) {
    out.push_back("the custom task needs a config file");
  }
  if (m.out_dir.empty()) out.push_back("no output directory");
  if (m.latency.fixed_delay < 0.0) out.push_back("negative latency");
  if (m.jobs < 0) out.push_back("negative job count");
  return out;
}

ExperimentConfig ResolveConfig(const RunManifest& m) {
  if (m.config_path.empty()) {
    return m.task == TaskKind::kWall ? ExperimentConfig::WallRotation()
                                     : ExperimentConfig::TrayRetrieval();
  }
  ExperimentConfig cfg = config::LoadConfig(m.config_path);
  if (m.task && *m.task != cfg.task) {
    throw config::ConfigError(m.config_path, 0, "task.kind",
                              "file declares " + std::string(config::ToString(cfg.task)) +
                                  " but --task is " + std::string(config::ToString(*m.task)));
  }
  return cfg;
}

EpisodeLog RunOne(const ExperimentConfig& cfg, const RunManifest& m, uint64_t seed,
                  bool force_objective) {
  harness::EpisodeOptions eo = cfg.episode;
  eo.mode = m.ablate_force_objective ? harness::BridgeMode::kOscArm : m.mode;
  eo.latency = m.latency;
  eo.seed = seed;
  eo.osc = cfg.osc;
  eo.osc.force_objective = cfg.osc.force_objective && force_objective;
  if (cfg.task == TaskKind::kWall) {
    harness::WallTaskOptions w = cfg.wall;
    w.episode = eo;
    return harness::RunWallTask(cfg.scenario, cfg.c3, w);
  }
  return harness::RunEpisode(cfg.scenario, cfg.targets, cfg.c3, eo);
}

BatchSummary Summarize(const std::string& label, const std::vector<EpisodeLog>& logs) {
  BatchSummary s;
  s.label = label;
  s.episodes = static_cast<int>(logs.size());
  std::vector<double> times;
  double total = 0.0;
  for (const EpisodeLog& log : logs) {
    s.successes += log.outcome == harness::Outcome::kSuccess;
    s.faults += log.outcome == harness::Outcome::kFault;
    for (size_t i = 0; i < log.reach_times.size(); ++i) {
      if (s.reach_times.size() <= i) s.reach_times.resize(i + 1);
      s.reach_times[i].push_back(log.reach_times[i]);
    }
    for (const harness::PlanRecord& p : log.plans) {
      if (p.solve_time <= 0.0) continue;
      times.push_back(1.0 / p.solve_time);
      total += p.solve_time;
    }
  }
  s.mean_hz = total > 0.0 ? times.size() / total : 0.0;
  s.median_hz = Median(times);
  return s;
}

std::string SummaryJson(const RunManifest& m, const ExperimentConfig& cfg,
                        const std::vector<BatchSummary>& batches,
                        const std::vector<std::vector<EpisodeLog>>& logs) {
  nlohmann::json j;
  j["task"] = std::string(config::ToString(cfg.task));
  j["mode"] = std::string(harness::ToString(
      m.ablate_force_objective ? harness::BridgeMode::kOscArm : m.mode));
  if (m.latency.wallclock) {
    j["latency"] = "wallclock";
  } else {
    j["latency"] = "fixed:" + std::to_string(m.latency.fixed_delay * 1e3).substr(0, 6) + "ms";
  }
  j["seeds"] = m.seeds;
  j["config"] = m.config_path.empty() ? "<built-in>" : m.config_path;
  nlohmann::json arr = nlohmann::json::array();
  for (size_t b = 0; b < batches.size(); ++b) {
    const BatchSummary& s = batches[b];
    nlohmann::json jb;
    jb["label"] = s.label;
    jb["episodes"] = s.episodes;
    jb["successes"] = s.successes;
    jb["success_rate"] = s.episodes ? static_cast<double>(s.successes) / s.episodes : 0.0;
    jb["faults"] = s.faults;
    nlohmann::json targets = nlohmann::json::array();
    for (size_t i = 0; i < s.reach_times.size(); ++i) {
      targets.push_back({{"target", i},
                         {"reached", s.reach_times[i].size()},
                         {"median_reach_time", Median(s.reach_times[i])},
                         {"reach_times", s.reach_times[i]}});
    }
    jb["targets"] = targets;
    jb["mean_replan_hz"] = s.mean_hz;
    jb["median_replan_hz"] = s.median_hz;
    nlohmann::json eps = nlohmann::json::array();
    for (const EpisodeLog& log : logs[b]) eps.push_back(nlohmann::json::parse(
        harness::EpisodeSummaryJson(log)));
    jb["episodes_detail"] = eps;
    arr.push_back(jb);
  }
  j["batches"] = arr;
  return j.dump(2) + "\n";
}

int CmdRun(const RunManifest& manifest, std::ostream& log) {
  RunManifest m = manifest;
  if (const auto errs = Validate(m); !errs.empty()) {
    for (const auto& e : errs) log << "error: " << e << "\n";
    return kExitUsage;
  }
  ExperimentConfig cfg;
  try {
    cfg = ResolveConfig(m);
  } catch (const config::ConfigError& e) {
    log << "config error: " << e.what() << "\n";
    return kExitUsage;
  }
  if (m.quick && m.seeds.size() > 2) m.seeds.resize(2);

  struct Arm {
    std::string label;
    bool force_objective;
  };
  std::vector<Arm> arms = {{"default", true}};
  if (m.ablate_force_objective) arms = {{"with_force", true}, {"without_force", false}};

  const fs::path out(m.out_dir);
  try {
    fs::create_directories(out);
    for (const Arm& a : arms) {
      if (arms.size() > 1) fs::create_directories(out / a.label);
    }
  } catch (const fs::filesystem_error& e) {
    log << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  // Every (arm, seed) pair is independent; workers pull them off a counter.
  const size_t jobs_total = arms.size() * m.seeds.size();
  std::vector<std::vector<EpisodeLog>> logs(arms.size(), std::vector<EpisodeLog>(m.seeds.size()));
  std::atomic<size_t> next{0};
  std::mutex log_mutex;
  auto worker = [&] {
    for (size_t k = next++; k < jobs_total; k = next++) {
      const size_t a = k / m.seeds.size(), i = k % m.seeds.size();
      EpisodeLog ep = RunOne(cfg, m, m.seeds[i], arms[a].force_objective);
      const fs::path dir = arms.size() > 1 ? out / arms[a].label : out;
      const std::string seed = std::to_string(m.seeds[i]);
      WriteFile(dir / ("episode_" + seed + ".csv"), harness::EpisodeCsv(ep));
      WriteFile(dir / ("plotdata_" + seed + ".json"), harness::PlotDataJson(ep));
      {
        std::lock_guard<std::mutex> lock(log_mutex);
        log << arms[a].label << " seed " << seed << ": " << harness::ToString(ep.outcome)
            << " t=" << ep.final_time << " targets=" << ep.reach_times.size()
            << " median_hz=" << harness::MedianReplanHz(ep);
        if (!ep.fault.empty()) log << " fault: " << ep.fault;
        log << "\n";
      }
      logs[a][i] = std::move(ep);
    }
  };
  int jobs = m.jobs > 0 ? m.jobs : static_cast<int>(std::thread::hardware_concurrency());
  jobs = std::clamp(jobs, 1, static_cast<int>(jobs_total));
  std::vector<std::thread> pool;
  for (int t = 1; t < jobs; ++t) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();

  std::vector<BatchSummary> batches;
  int faults = 0;
  for (size_t a = 0; a < arms.size(); ++a) {
    batches.push_back(Summarize(arms[a].label, logs[a]));
    faults += batches.back().faults;
    log << arms[a].label << ": " << batches.back().successes << "/" << batches.back().episodes
        << " succeeded, median " << batches.back().median_hz << " Hz\n";
  }
  WriteFile(out / "summary.json", SummaryJson(m, cfg, batches, logs));
  return faults > 0 ? kExitFailure : kExitOk;
}

int CmdVerify(bool quick, std::ostream& out) {
  verify::SuiteOptions opts;
  opts.quick = quick;
  bool ok = true;
  for (const verify::SuiteResult& r : verify::RunAllSuites(opts)) {
    out << verify::FormatSuite(r) << "\n";
    ok = ok && r.passed;
  }
  out << (ok ? "all suites passed" : "suite failures") << "\n";
  return ok ? kExitOk : kExitFailure;
}

}  // namespace cli
}  // namespace onpalm
