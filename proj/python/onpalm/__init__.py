"""Contact-implicit MPC for on-palm tray manipulation (C++ core bindings)."""

import json

from ._core import (
    ConfigError,
    LcpMethod,
    Lcs,
    SimulationFault,
    c3_plan,
    complementarity_residual,
    config_diff,
    default_config,
    ground_truth_step,
    linearize,
    parse_config,
    resting_tray_state,
    solve_lcp,
    verify,
)
from ._core import run_episode as _run_episode


def run_episode(config_yaml=None, seed=0, mode="direct", time_limit=0.0):
    """One closed-loop episode. Returns (summary dict, csv text, plot-data dict)."""
    if config_yaml is None:
        config_yaml = default_config("tray")
    out = _run_episode(config_yaml, seed, mode, time_limit)
    return json.loads(out["summary"]), out["csv"], json.loads(out["plotdata"])


__all__ = [
    "ConfigError",
    "LcpMethod",
    "Lcs",
    "SimulationFault",
    "c3_plan",
    "complementarity_residual",
    "config_diff",
    "default_config",
    "ground_truth_step",
    "linearize",
    "parse_config",
    "resting_tray_state",
    "run_episode",
    "solve_lcp",
    "verify",
]
