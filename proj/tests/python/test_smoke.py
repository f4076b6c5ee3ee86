import json

import numpy as np
import pytest

import onpalm


def test_lcp_methods_agree():
    rng = np.random.default_rng(0)
    B = rng.standard_normal((4, 4))
    M = B @ B.T + 0.1 * np.eye(4)
    q = rng.standard_normal(4)
    lam_e, ok_e, _ = onpalm.solve_lcp(M, q, onpalm.LcpMethod.ENUMERATE)
    lam_i, ok_i, res = onpalm.solve_lcp(M, q, onpalm.LcpMethod.ITERATIVE)
    assert ok_e and ok_i
    assert res <= 1e-6
    w = M @ lam_i + q
    assert lam_i.min() >= -1e-9 and w.min() >= -1e-9
    np.testing.assert_allclose(lam_e, lam_i, atol=1e-6)


def test_linearized_tray_model_and_step():
    x = onpalm.resting_tray_state("tray")
    assert x.shape == (19,)
    m = onpalm.linearize(x, np.zeros(3), 0.075)
    assert (m.num_states, m.num_inputs, m.num_lambdas) == (19, 3, 28)
    assert m.validate() == []
    x_next, lam, res = m.step(x, np.zeros(3))
    assert res <= 1e-6
    assert onpalm.complementarity_residual(m, x, np.zeros(3), lam, x_next) <= 1e-6
    back = onpalm.Lcs.from_json(m.to_json())
    np.testing.assert_array_equal(back.A, m.A)


def test_ground_truth_keeps_resting_tray_still():
    x = onpalm.resting_tray_state("tray")
    for _ in range(100):
        x, _ = onpalm.ground_truth_step(x, np.zeros(3), 1e-3, "tray")
    np.testing.assert_allclose(x[7:10], onpalm.resting_tray_state("tray")[7:10], atol=1e-6)


def test_c3_plan_shapes():
    x = onpalm.resting_tray_state("tray")
    m = onpalm.linearize(x, np.zeros(3), 0.075)
    plan = onpalm.c3_plan(m, x, x)
    assert plan["ok"], plan["error"]
    assert len(plan["x"]) == 6 and len(plan["u"]) == 5
    assert all(len(lam) == 28 for lam in plan["lambda"])


def test_config_round_trip_and_errors():
    text = onpalm.default_config("tray")
    assert onpalm.parse_config(text) == text
    assert onpalm.config_diff(text, onpalm.default_config("wall"))
    with pytest.raises(onpalm.ConfigError, match="c3.rhoo"):
        onpalm.parse_config("c3:\n  rhoo: 1\n")


def test_verify_quick():
    suites = onpalm.verify(True)
    assert {s["name"] for s in suites} >= {"lcp", "linearization", "projection", "osc"}
    assert all(s["passed"] for s in suites)


def test_short_episode_exports():
    summary, csv, plot = onpalm.run_episode(seed=1, time_limit=0.3)
    assert summary["outcome"] == "TIMEOUT"
    assert summary["worst_lcp_residual"] <= 1e-6
    rows = csv.strip().splitlines()
    assert rows[0].startswith("t,target,ee_x")
    assert len(rows) > 10
    assert len(plot["t"]) == len(rows) - 1
