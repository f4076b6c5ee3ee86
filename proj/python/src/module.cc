#include <sstream>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "onpalm/c3/c3.h"
#include "onpalm/cli/cli.h"
#include "onpalm/config/config.h"
#include "onpalm/harness/harness.h"
#include "onpalm/lcs/lcs.h"
#include "onpalm/numopt/lcp_solver.h"
#include "onpalm/scenario/dynamics.h"
#include "onpalm/verify/verify.h"

namespace py = pybind11;
using namespace onpalm;

namespace {

scenario::ScenarioConfig ScenarioFor(const std::string& task) {
  if (task == "tray") return scenario::ScenarioConfig::TrayRetrieval();
  if (task == "wall") return scenario::ScenarioConfig::WallRotation();
  throw py::value_error("task must be 'tray' or 'wall'");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Bindings for the onpalm C++ core";

  py::register_exception<config::ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<scenario::SimulationFault>(m, "SimulationFault", PyExc_RuntimeError);

  py::enum_<numopt::LcpMethod>(m, "LcpMethod")
      .value("ENUMERATE", numopt::LcpMethod::kEnumerate)
      .value("ITERATIVE", numopt::LcpMethod::kIterative);

  m.def(
      "solve_lcp",
      [](const Eigen::MatrixXd& M, const Eigen::VectorXd& q, numopt::LcpMethod method) {
        const numopt::LcpResult r = numopt::SolveLcp({M, q}, method);
        return py::make_tuple(r.lambda, r.status == numopt::LcpStatus::kSolved, r.residual);
      },
      py::arg("M"), py::arg("q"), py::arg("method") = numopt::LcpMethod::kIterative,
      "Returns (lambda, solved, residual) for 0 <= lambda _|_ M lambda + q >= 0.");

  py::class_<lcs::Lcs>(m, "Lcs")
      .def(py::init<int, int, int, double>(), py::arg("n_x"), py::arg("n_u"), py::arg("n_lambda"),
           py::arg("dt"))
      .def_readwrite("A", &lcs::Lcs::A)
      .def_readwrite("B", &lcs::Lcs::B)
      .def_readwrite("D", &lcs::Lcs::D)
      .def_readwrite("d", &lcs::Lcs::d)
      .def_readwrite("E", &lcs::Lcs::E)
      .def_readwrite("F", &lcs::Lcs::F)
      .def_readwrite("H", &lcs::Lcs::H)
      .def_readwrite("c", &lcs::Lcs::c)
      .def_readwrite("dt", &lcs::Lcs::dt)
      .def_property_readonly("num_states", &lcs::Lcs::num_states)
      .def_property_readonly("num_inputs", &lcs::Lcs::num_inputs)
      .def_property_readonly("num_lambdas", &lcs::Lcs::num_lambdas)
      .def("validate", [](const lcs::Lcs& s) { return lcs::Validate(s); })
      .def(
          "step",
          [](const lcs::Lcs& s, const Eigen::VectorXd& x, const Eigen::VectorXd& u) {
            const lcs::StepResult r = lcs::Step(s, x, u);
            return py::make_tuple(r.x_next, r.lambda, r.lcp_residual);
          },
          "Returns (x_next, lambda, lcp_residual).")
      .def("to_json", [](const lcs::Lcs& s) { return lcs::ToJson(s); })
      .def_static("from_json", &lcs::LcsFromJson);

  m.def("complementarity_residual", &lcs::ComplementarityResidual, py::arg("model"), py::arg("x"),
        py::arg("u"), py::arg("lam"), py::arg("x_next"));

  m.def(
      "resting_tray_state", [](const std::string& task) {
        return scenario::RestingTrayState(ScenarioFor(task));
      },
      py::arg("task") = "tray");
  m.def(
      "linearize",
      [](const Eigen::VectorXd& x, const Eigen::VectorXd& u, double dt, const std::string& task) {
        return scenario::LinearizeDynamics(ScenarioFor(task), x, u, dt);
      },
      py::arg("x"), py::arg("u"), py::arg("dt"), py::arg("task") = "tray");
  m.def(
      "ground_truth_step",
      [](const Eigen::VectorXd& x, const Eigen::VectorXd& ee_force, double dt,
         const std::string& task) {
        const scenario::GroundTruthResult r =
            scenario::GroundTruthStep(ScenarioFor(task), x, ee_force, dt);
        return py::make_tuple(r.x_next, r.lambda);
      },
      py::arg("x"), py::arg("ee_force"), py::arg("dt") = 1e-3, py::arg("task") = "tray",
      "Returns (x_next, ray_forces).");

  m.def(
      "c3_plan",
      [](const lcs::Lcs& model, const Eigen::VectorXd& x0, const Eigen::VectorXd& target,
         const std::string& task) {
        const c3::C3Params p =
            task == "wall" ? c3::C3Params::WallRotation() : c3::C3Params::TrayRetrieval();
        const c3::C3Solution s = c3::Solve(model, x0, target, p);
        py::dict d;
        d["ok"] = s.status == c3::C3Status::kOk;
        d["error"] = s.error;
        d["x"] = s.x;
        d["u"] = s.u;
        d["lambda"] = s.lambda;
        d["objective"] = s.objective;
        d["solve_time"] = s.solve_time;
        return d;
      },
      py::arg("model"), py::arg("x0"), py::arg("target"), py::arg("task") = "tray",
      "One C3 solve with the task's default parameters.");

  m.def("parse_config", [](const std::string& text) {
    return config::EmitConfig(config::ParseConfig(text));
  }, "Validates a config and returns its normalized YAML.");
  m.def("default_config", [](const std::string& task) {
    return config::EmitConfig(task == "wall" ? config::ExperimentConfig::WallRotation()
                                             : config::ExperimentConfig::TrayRetrieval());
  }, py::arg("task") = "tray");
  m.def("config_diff", [](const std::string& a, const std::string& b) {
    return config::Diff(config::ParseConfig(a, "a"), config::ParseConfig(b, "b"));
  });

  m.def(
      "run_episode",
      [](const std::string& config_yaml, uint64_t seed, const std::string& mode,
         double time_limit) {
        config::ExperimentConfig cfg = config::ParseConfig(config_yaml);
        if (time_limit > 0.0) {
          cfg.targets.time_limit = time_limit;
          cfg.wall.time_limit = time_limit;
        }
        cli::RunManifest man;
        man.mode = cli::ParseMode(mode);
        harness::EpisodeLog log;
        {
          py::gil_scoped_release release;
          log = cli::RunOne(cfg, man, seed);
        }
        py::dict d;
        d["summary"] = harness::EpisodeSummaryJson(log);
        d["csv"] = harness::EpisodeCsv(log);
        d["plotdata"] = harness::PlotDataJson(log);
        return d;
      },
      py::arg("config_yaml"), py::arg("seed") = 0, py::arg("mode") = "direct",
      py::arg("time_limit") = 0.0,
      "Runs one closed-loop episode; returns summary JSON, CSV and plot-data JSON strings.");

  m.def(
      "verify",
      [](bool quick) {
        verify::SuiteOptions o;
        o.quick = quick;
        py::list out;
        for (const verify::SuiteResult& r : verify::RunAllSuites(o)) {
          py::dict d;
          d["name"] = r.name;
          d["passed"] = r.passed;
          d["cases"] = r.cases;
          d["worst"] = r.worst;
          d["tolerance"] = r.tolerance;
          out.append(d);
        }
        return out;
      },
      py::arg("quick") = true);
}
