#include <iostream>

#include <CLI11.hpp>

#include "onpalm/cli/cli.h"
#include "onpalm/scenario/contacts.h"

using namespace onpalm;

int main(int argc, char** argv) {
  CLI::App app{"Contact-implicit MPC for on-palm tray manipulation"};
  app.require_subcommand(1);

  cli::RunManifest manifest;
  std::string task, seeds = "10", mode = "direct", latency = "fixed:25";
  CLI::App* run = app.add_subcommand("run", "Run seeded closed-loop episodes");
  run->add_option("--config", manifest.config_path, "Experiment YAML (default: built-in task)");
  run->add_option("--task", task, "tray, wall or custom");
  run->add_option("--seeds", seeds, "Range a-b, list a,b,c, or a count n (seeds 0..n-1)")
      ->capture_default_str();
  run->add_option("--mode", mode, "direct or osc")->capture_default_str();
  run->add_option("--latency", latency, "fixed:<ms> or wallclock")->capture_default_str();
  run->add_option("--out", manifest.out_dir, "Output directory")->capture_default_str();
  run->add_option("--jobs", manifest.jobs, "Worker threads (0: all cores)");
  run->add_flag("--ablate-force-objective", manifest.ablate_force_objective,
                "Run each seed in OSC mode with and without the force term");
  run->add_flag("--quick", manifest.quick, "Only the first two seeds");

  bool quick_verify = false, flip = false;
  CLI::App* verify = app.add_subcommand("verify", "Run the oracle suites");
  verify->add_flag("--quick", quick_verify, "Reduced case counts");
  verify->add_flag("--inject-tangent-flip", flip,
                   "Flip the t1 rows of every contact Jacobian (the Jacobian suite must fail)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : cli::kExitUsage;
  }

  if (*verify) {
    scenario::SetTangentFlipForTesting(flip);
    return cli::CmdVerify(quick_verify, std::cout);
  }

  try {
    if (!task.empty()) manifest.task = cli::ParseTask(task);
    manifest.seeds = cli::ParseSeeds(seeds);
    manifest.mode = cli::ParseMode(mode);
    manifest.latency = cli::ParseLatency(latency);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cli::kExitUsage;
  }
  return cli::CmdRun(manifest, std::cerr);
}
